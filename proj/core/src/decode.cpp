#include "uprompt/decode.hpp"

#include <algorithm>
#include <cmath>

namespace uprompt {

void DecodeConfig::validate() const {
    if (beam_size < 1) {
        throw ConfigError("decoding needs beam_size >= 1");
    }
    if (max_len < 1) {
        throw ConfigError("decoding needs max_len >= 1");
    }
    if (length_alpha < 0.0) {
        throw ConfigError("length_alpha cannot be negative");
    }
}

double hypothesis_score(const Hypothesis& hyp, double alpha) {
    if (alpha == 0.0) {
        return hyp.logprob;
    }
    const double denom = std::pow(static_cast<double>(hyp.units.size()) + 1.0, alpha);
    return hyp.logprob / denom;
}

namespace {

template <class T>
std::vector<double> last_row_logprobs(const Tensor<T>& logits) {
    const int rows = logits.rows();
    const int cols = logits.cols();
    if (rows == 0) {
        throw ShapeError("scorer produced no logit rows");
    }
    const T* row = logits.values().data() + static_cast<std::size_t>(rows - 1) * cols;
    std::vector<double> lp(row, row + cols);
    double mx = lp[0];
    for (double v : lp) mx = std::max(mx, v);
    double total = 0.0;
    for (double v : lp) total += std::exp(v - mx);
    const double log_z = mx + std::log(total);
    for (double& v : lp) v -= log_z;
    return lp;
}

}  // namespace

template <class T>
UnitScorer<T>::UnitScorer(const UnitLM<T>& lm, const PromptSet<T>* prompts, UnitSeq source)
    : lm_(lm), prompts_(prompts), source_(std::move(source)) {
    lm_.vocab().check_all(source_);
    if (lm_.config().variant == LMVariant::encoder_decoder) {
        NoGradGuard guard;
        memory_ = lm_.encode(lm_.embed_source(source_), prompts_);
    }
}

template <class T>
int UnitScorer<T>::space_size() const {
    return lm_.vocab().size;
}

template <class T>
int UnitScorer<T>::eos_id() const {
    return lm_.vocab().eos;
}

template <class T>
std::vector<double> UnitScorer<T>::step_logprobs(const std::vector<int>& prefix) const {
    NoGradGuard guard;
    Tensor<T> logits;
    if (lm_.config().variant == LMVariant::encoder_decoder) {
        UnitSeq dec_in;
        dec_in.reserve(prefix.size() + 1);
        dec_in.push_back(lm_.vocab().bos);
        dec_in.insert(dec_in.end(), prefix.begin(), prefix.end());
        Tensor<T> h = lm_.decode_states(lm_.embed_units(dec_in), &memory_, prompts_);
        logits = lm_.logits_from_states(h);
    } else {
        Tensor<T> h = lm_.decode_states(lm_.embed_decoder_input(source_, prefix), nullptr,
                                        prompts_);
        logits = lm_.logits_from_states(h);
    }
    return last_row_logprobs(logits);
}

template <class T>
LabelScorer<T>::LabelScorer(const UnitLM<T>& lm, const PromptSet<T>* prompts,
                            const LearnableVerbalizer<T>& verb, UnitSeq source)
    : lm_(lm), prompts_(prompts), verb_(verb) {
    lm_.vocab().check_all(source);
    if (verb_.vocab_width() != lm_.vocab().size) {
        throw ShapeError("verbalizer width does not match the model vocabulary");
    }
    encdec_ = lm_.config().variant == LMVariant::encoder_decoder;
    if (encdec_) {
        NoGradGuard guard;
        memory_ = lm_.encode(lm_.embed_source(source), prompts_);
        base_ids_ = {lm_.vocab().bos};
    } else {
        base_ids_ = std::move(source);
        base_ids_.push_back(lm_.vocab().sep);
    }
}

template <class T>
int LabelScorer<T>::space_size() const {
    return verb_.n_labels() + 1;
}

template <class T>
int LabelScorer<T>::eos_id() const {
    return verb_.n_labels();
}

template <class T>
std::vector<double> LabelScorer<T>::step_logprobs(const std::vector<int>& prefix) const {
    NoGradGuard guard;
    Tensor<T> h1 = feedback_states(lm_, verb_, base_ids_, prefix);
    Tensor<T> h = lm_.decode_states(h1, encdec_ ? &memory_ : nullptr, prompts_);
    Tensor<T> z = lm_.logits_from_states(h);
    Tensor<T> last = slice_rows(z, z.rows() - 1, z.rows());
    Tensor<T> aug = augmented_logits(verb_, last, lm_.vocab().eos);
    return last_row_logprobs(aug);
}

namespace {

bool better_hypothesis(const Hypothesis& a, const Hypothesis& b, double alpha) {
    const double sa = hypothesis_score(a, alpha);
    const double sb = hypothesis_score(b, alpha);
    if (sa != sb) {
        return sa > sb;
    }
    if (a.finished != b.finished) {
        return a.finished;
    }
    return a.units < b.units;
}

}  // namespace

std::vector<Hypothesis> beam_decode(const Scorer& scorer, const DecodeConfig& cfg) {
    cfg.validate();
    const int space = scorer.space_size();
    const int eos = scorer.eos_id();
    if (space < 2 || eos < 0 || eos >= space) {
        throw ConfigError("scorer decode space is degenerate");
    }
    std::vector<Hypothesis> beams{Hypothesis{}};
    for (int step = 0; step < cfg.max_len; ++step) {
        bool any_open = false;
        std::vector<Hypothesis> candidates;
        for (const auto& hyp : beams) {
            if (hyp.finished) {
                candidates.push_back(hyp);
                continue;
            }
            any_open = true;
            const std::vector<double> lp = scorer.step_logprobs(hyp.units);
            if (static_cast<int>(lp.size()) != space) {
                throw ShapeError("scorer step width does not match its space size");
            }
            for (int id = 0; id < space; ++id) {
                Hypothesis next = hyp;
                next.logprob += lp[static_cast<std::size_t>(id)];
                if (id == eos) {
                    next.finished = true;
                } else {
                    next.units.push_back(id);
                }
                candidates.push_back(std::move(next));
            }
        }
        if (!any_open) {
            break;
        }
        std::sort(candidates.begin(), candidates.end(), [&](const auto& a, const auto& b) {
            return better_hypothesis(a, b, cfg.length_alpha);
        });
        if (static_cast<int>(candidates.size()) > cfg.beam_size) {
            candidates.resize(static_cast<std::size_t>(cfg.beam_size));
        }
        beams = std::move(candidates);
    }
    std::sort(beams.begin(), beams.end(), [&](const auto& a, const auto& b) {
        return better_hypothesis(a, b, cfg.length_alpha);
    });
    return beams;
}

Hypothesis greedy_decode(const Scorer& scorer, const DecodeConfig& cfg) {
    cfg.validate();
    const int space = scorer.space_size();
    const int eos = scorer.eos_id();
    if (space < 2 || eos < 0 || eos >= space) {
        throw ConfigError("scorer decode space is degenerate");
    }
    Hypothesis hyp;
    for (int step = 0; step < cfg.max_len; ++step) {
        const std::vector<double> lp = scorer.step_logprobs(hyp.units);
        if (static_cast<int>(lp.size()) != space) {
            throw ShapeError("scorer step width does not match its space size");
        }
        const int id = argmax(lp);
        hyp.logprob += lp[static_cast<std::size_t>(id)];
        if (id == eos) {
            hyp.finished = true;
            break;
        }
        hyp.units.push_back(id);
    }
    return hyp;
}

Hypothesis decode_best(const Scorer& scorer, const DecodeConfig& cfg) {
    if (cfg.strategy == DecodeStrategy::greedy) {
        return greedy_decode(scorer, cfg);
    }
    std::vector<Hypothesis> beams = beam_decode(scorer, cfg);
    if (beams.empty()) {
        throw NumericError("beam search returned no hypotheses");
    }
    return beams.front();
}

double forced_logprob(const Scorer& scorer, const std::vector<int>& target, bool include_eos) {
    const int space = scorer.space_size();
    std::vector<int> prefix;
    prefix.reserve(target.size());
    double total = 0.0;
    for (int id : target) {
        if (id < 0 || id >= space) {
            throw IndexError("forced id " + std::to_string(id) + " outside decode space");
        }
        const std::vector<double> lp = scorer.step_logprobs(prefix);
        total += lp[static_cast<std::size_t>(id)];
        prefix.push_back(id);
    }
    if (include_eos) {
        const std::vector<double> lp = scorer.step_logprobs(prefix);
        total += lp[static_cast<std::size_t>(scorer.eos_id())];
    }
    return total;
}

template <class T>
TaskPrediction predict_example(const UnitLM<T>& lm, const PromptSet<T>& prompts,
                               const VerbalizerRef<T>& verb, const TaskSpec& task,
                               const Example& ex, const DecodeConfig& cfg) {
    task.validate();
    if (ex.units.empty()) {
        throw DataError("example has no units");
    }
    TaskPrediction pred;
    if (task.kind == TaskKind::generation) {
        if (verb.fixed != nullptr || verb.learnable != nullptr) {
            throw UsageError("generation tasks decode raw units and take no verbalizer");
        }
        auto [seed_units, target] = split_continuation(ex.units, task.cond_ratio);
        (void)target;
        UnitScorer<T> scorer(lm, &prompts, seed_units);
        Hypothesis best = decode_best(scorer, cfg);
        pred.units = best.units;
        pred.logprob = best.logprob;
        pred.finished = best.finished;
        return pred;
    }
    if ((verb.fixed != nullptr) == (verb.learnable != nullptr)) {
        throw UsageError("label tasks need exactly one verbalizer (fixed or learnable)");
    }
    if (verb.learnable != nullptr) {
        LabelScorer<T> scorer(lm, &prompts, *verb.learnable, ex.units);
        Hypothesis best = decode_best(scorer, cfg);
        pred.labels = best.units;
        pred.logprob = best.logprob;
        pred.finished = best.finished;
        return pred;
    }
    UnitScorer<T> scorer(lm, &prompts, ex.units);
    Hypothesis best = decode_best(scorer, cfg);
    pred.units = best.units;
    pred.logprob = best.logprob;
    pred.finished = best.finished;
    pred.labels.reserve(best.units.size());
    for (int unit : best.units) {
        pred.labels.push_back(verb.fixed->label_of(unit));
    }
    return pred;
}

#define UPROMPT_INSTANTIATE_DECODE(T)                                                       \
    template class UnitScorer<T>;                                                           \
    template class LabelScorer<T>;                                                          \
    template TaskPrediction predict_example<T>(const UnitLM<T>&, const PromptSet<T>&,       \
                                               const VerbalizerRef<T>&, const TaskSpec&,    \
                                               const Example&, const DecodeConfig&);

UPROMPT_INSTANTIATE_DECODE(float)
UPROMPT_INSTANTIATE_DECODE(double)

#undef UPROMPT_INSTANTIATE_DECODE

}  // namespace uprompt
