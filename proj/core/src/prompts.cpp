#include "uprompt/prompts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace uprompt {

template <class T>
std::vector<Tensor<T>> PromptSet<T>::trainable_tensors() const {
    std::vector<Tensor<T>> out;
    if (l == 0) {
        return out;
    }
    for (const auto& stack : stacks) {
        if (use_input) {
            out.push_back(stack.input);
        }
        if (use_deep) {
            for (const auto& t : stack.pk) out.push_back(t);
            for (const auto& t : stack.pv) out.push_back(t);
        }
    }
    return out;
}

template <class T>
long PromptSet<T>::param_count() const {
    long n = 0;
    for (const auto& t : trainable_tensors()) {
        n += static_cast<long>(t.numel());
    }
    return n;
}

template <class T>
PromptSet<T> PromptSet<T>::clone_values() const {
    PromptSet out;
    out.l = l;
    out.use_input = use_input;
    out.use_deep = use_deep;
    out.stacks.reserve(stacks.size());
    for (const auto& stack : stacks) {
        StackPrompts<T> copy;
        copy.input = Tensor<T>::from(stack.input.shape(), stack.input.values());
        for (const auto& t : stack.pk) {
            copy.pk.push_back(Tensor<T>::from(t.shape(), t.values()));
        }
        for (const auto& t : stack.pv) {
            copy.pv.push_back(Tensor<T>::from(t.shape(), t.values()));
        }
        out.stacks.push_back(std::move(copy));
    }
    return out;
}

template <class T>
void PromptSet<T>::copy_values_from(const PromptSet& other) {
    if (other.stacks.size() != stacks.size() || other.l != l) {
        throw ShapeError("prompt sets have different structure");
    }
    for (std::size_t s = 0; s < stacks.size(); ++s) {
        auto& dst = stacks[s];
        const auto& src = other.stacks[s];
        if (src.pk.size() != dst.pk.size() || src.pv.size() != dst.pv.size() ||
            src.input.shape() != dst.input.shape()) {
            throw ShapeError("prompt sets have different structure");
        }
        dst.input.values() = src.input.values();
        for (std::size_t i = 0; i < dst.pk.size(); ++i) {
            dst.pk[i].values() = src.pk[i].values();
            dst.pv[i].values() = src.pv[i].values();
        }
    }
}

template <class T>
PromptSet<T> init_prompts(const LMConfig& config, int l, std::uint64_t seed) {
    config.validate();
    if (l < 0) {
        throw ConfigError("prompt length cannot be negative");
    }
    const int n_stacks = config.variant == LMVariant::encoder_decoder ? 2 : 1;
    Rng rng(seed);
    PromptSet<T> out;
    out.l = l;
    out.stacks.resize(static_cast<std::size_t>(n_stacks));
    for (auto& stack : out.stacks) {
        stack.input = Tensor<T>::randn({l, config.d_model}, rng, static_cast<T>(0.02));
        stack.input.set_trainable(true);
        for (int i = 0; i < config.n_layers; ++i) {
            Tensor<T> pk = Tensor<T>::randn({l, config.d_model}, rng, static_cast<T>(0.02));
            Tensor<T> pv = Tensor<T>::randn({l, config.d_model}, rng, static_cast<T>(0.02));
            pk.set_trainable(true);
            pv.set_trainable(true);
            stack.pk.push_back(std::move(pk));
            stack.pv.push_back(std::move(pv));
        }
    }
    return out;
}

long prompt_param_formula(const LMConfig& config, int l) {
    const long stacks = config.variant == LMVariant::encoder_decoder ? 2 : 1;
    const long layers = stacks * config.n_layers;
    return stacks * l * config.d_model + layers * 2L * l * config.d_model;
}

template <class T>
TrainableCount count_trainable(const PromptSet<T>& prompts,
                               const LearnableVerbalizer<T>* verb) {
    TrainableCount count;
    count.prompts = prompts.param_count();
    if (verb != nullptr) {
        count.verbalizer = static_cast<long>(verb->W.numel());
    }
    count.total = count.prompts + count.verbalizer;
    return count;
}

template <class T>
Tensor<T> apply_input_prompts(const Tensor<T>& h1, const Tensor<T>& p_input) {
    if (p_input.rows() == 0) {
        return h1;
    }
    if (p_input.cols() != h1.cols()) {
        throw ShapeError("input prompt width does not match hidden width");
    }
    return concat_rows(p_input, h1);
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> apply_deep_prompts(const Tensor<T>& h, const Tensor<T>& pk,
                                                   const Tensor<T>& pv, const Tensor<T>& wk,
                                                   const Tensor<T>& wv) {
    if (pk.rows() != pv.rows()) {
        throw ShapeError("key and value prompts must have matching lengths");
    }
    Tensor<T> keys_in = pk.rows() > 0 ? concat_rows(pk, h) : h;
    Tensor<T> values_in = pv.rows() > 0 ? concat_rows(pv, h) : h;
    return {matmul(keys_in, wk), matmul(values_in, wv)};
}

template <class T>
Tensor<T> feedback_states(const UnitLM<T>& lm, const LearnableVerbalizer<T>& verb,
                          const UnitSeq& base_ids, const std::vector<int>& labels) {
    Tensor<T> h1 = lm.embed_units(base_ids);
    if (labels.empty()) {
        return h1;
    }
    Tensor<T> cls_emb = class_embeddings(verb, lm.embedding());
    const int base_len = static_cast<int>(base_ids.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= verb.n_labels()) {
            throw IndexError("label " + std::to_string(y) + " outside verbalizer range");
        }
        const int pos = base_len + static_cast<int>(i);
        Tensor<T> row = add(slice_rows(cls_emb, y, y + 1),
                            slice_rows(lm.positions(), pos, pos + 1));
        h1 = concat_rows(h1, row);
    }
    return h1;
}

namespace {

/// Transformed logits over the |Y|+1 decode space for each scored row:
/// class columns W . z plus the raw <eos> column.
template <class T>
Tensor<T> augment_rows(const LearnableVerbalizer<T>& verb, const Tensor<T>& z_rows,
                       int eos_id) {
    Tensor<T> classes = matmul_nt(z_rows, verb.W);
    Tensor<T> stop = slice_cols(z_rows, eos_id, eos_id + 1);
    return concat_cols(classes, stop);
}


template <class T>
void check_verbalizer(const VerbalizerRef<T>& verb, const TaskSpec& task) {
    const bool has_fixed = verb.fixed != nullptr;
    const bool has_learnable = verb.learnable != nullptr;
    if (task.kind == TaskKind::generation) {
        if (has_fixed || has_learnable) {
            throw UsageError("generation tasks decode raw units and take no verbalizer");
        }
        return;
    }
    if (has_fixed == has_learnable) {
        throw UsageError("label tasks need exactly one verbalizer (fixed or learnable)");
    }
}

}  // namespace

template <class T>
Tensor<T> example_loss(const UnitLM<T>& lm, const PromptSet<T>& prompts,
                       const VerbalizerRef<T>& verb, const TaskSpec& task, const Example& ex) {
    task.validate();
    check_verbalizer(verb, task);
    if (ex.units.empty()) {
        throw DataError("example has no units");
    }
    const Vocabulary& vocab = lm.vocab();
    const bool encdec = lm.config().variant == LMVariant::encoder_decoder;
    const int l_in = prompts.input_len();

    if (task.kind == TaskKind::classification) {
        const int y = ex.class_id;
        if (y < 0 || y >= task.n_labels) {
            throw DataError("example class_id " + std::to_string(y) + " outside " +
                            std::to_string(task.n_labels) + " labels");
        }
        if (verb.fixed != nullptr) {
            const int uy = verb.fixed->unit_for(y);
            UnitSeq dec_in;
            Tensor<T> logits;
            int base = 0;
            if (encdec) {
                dec_in = {vocab.bos, uy};
                logits = lm.forward_encdec(ex.units, dec_in, &prompts);
                base = l_in;
            } else {
                dec_in = ex.units;
                dec_in.push_back(vocab.sep);
                dec_in.push_back(uy);
                logits = lm.forward_decoder_only(dec_in, &prompts);
                base = l_in + static_cast<int>(ex.units.size());
            }
            std::vector<int> targets(static_cast<std::size_t>(logits.rows()), -1);
            targets[static_cast<std::size_t>(base)] = uy;
            targets[static_cast<std::size_t>(base) + 1] = vocab.eos;
            return cross_entropy_rows(logits, targets);
        }
        const auto& lv = *verb.learnable;
        UnitSeq base_ids;
        int base = 0;
        Tensor<T> h;
        if (encdec) {
            base_ids = {vocab.bos};
            Tensor<T> h1 = feedback_states(lm, lv, base_ids, {y});
            Tensor<T> memory = lm.encode(lm.embed_source(ex.units), &prompts);
            h = lm.decode_states(h1, &memory, &prompts);
            base = l_in;
        } else {
            base_ids = ex.units;
            base_ids.push_back(vocab.sep);
            Tensor<T> h1 = feedback_states(lm, lv, base_ids, {y});
            h = lm.decode_states(h1, nullptr, &prompts);
            base = l_in + static_cast<int>(ex.units.size());
        }
        Tensor<T> z = lm.logits_from_states(h);
        Tensor<T> scored = slice_rows(z, base, base + 2);
        Tensor<T> aug = augment_rows(lv, scored, vocab.eos);
        return cross_entropy_rows(aug, {y, lv.n_labels()});
    }

    if (task.kind == TaskKind::sequence) {
        if (ex.labels.empty()) {
            throw DataError("sequence example has no labels");
        }
        for (int lab : ex.labels) {
            if (lab < 0 || lab >= task.n_labels) {
                throw DataError("label " + std::to_string(lab) + " outside " +
                                std::to_string(task.n_labels) + " labels");
            }
        }
        const int m = static_cast<int>(ex.labels.size());
        if (verb.fixed != nullptr) {
            UnitSeq mapped;
            mapped.reserve(ex.labels.size());
            for (int lab : ex.labels) {
                mapped.push_back(verb.fixed->unit_for(lab));
            }
            UnitSeq dec_in;
            Tensor<T> logits;
            int base = 0;
            if (encdec) {
                dec_in.push_back(vocab.bos);
                dec_in.insert(dec_in.end(), mapped.begin(), mapped.end());
                logits = lm.forward_encdec(ex.units, dec_in, &prompts);
                base = l_in;
            } else {
                dec_in = ex.units;
                dec_in.push_back(vocab.sep);
                dec_in.insert(dec_in.end(), mapped.begin(), mapped.end());
                logits = lm.forward_decoder_only(dec_in, &prompts);
                base = l_in + static_cast<int>(ex.units.size());
            }
            std::vector<int> targets(static_cast<std::size_t>(logits.rows()), -1);
            for (int i = 0; i < m; ++i) {
                targets[static_cast<std::size_t>(base + i)] = mapped[static_cast<std::size_t>(i)];
            }
            targets[static_cast<std::size_t>(base + m)] = vocab.eos;
            return cross_entropy_rows(logits, targets);
        }
        const auto& lv = *verb.learnable;
        UnitSeq base_ids;
        int base = 0;
        Tensor<T> h;
        if (encdec) {
            base_ids = {vocab.bos};
            Tensor<T> h1 = feedback_states(lm, lv, base_ids, ex.labels);
            Tensor<T> memory = lm.encode(lm.embed_source(ex.units), &prompts);
            h = lm.decode_states(h1, &memory, &prompts);
            base = l_in;
        } else {
            base_ids = ex.units;
            base_ids.push_back(vocab.sep);
            Tensor<T> h1 = feedback_states(lm, lv, base_ids, ex.labels);
            h = lm.decode_states(h1, nullptr, &prompts);
            base = l_in + static_cast<int>(ex.units.size());
        }
        Tensor<T> z = lm.logits_from_states(h);
        Tensor<T> scored = slice_rows(z, base, base + m + 1);
        Tensor<T> aug = augment_rows(lv, scored, vocab.eos);
        std::vector<int> targets(ex.labels.begin(), ex.labels.end());
        targets.push_back(lv.n_labels());
        return cross_entropy_rows(aug, targets);
    }

    // generation: continuation of the unit stream itself
    auto [seed_units, target] = split_continuation(ex.units, task.cond_ratio);
    if (encdec) {
        UnitSeq dec_in;
        dec_in.push_back(vocab.bos);
        dec_in.insert(dec_in.end(), target.begin(), target.end());
        Tensor<T> logits = lm.forward_encdec(seed_units, dec_in, &prompts);
        std::vector<int> targets(static_cast<std::size_t>(logits.rows()), -1);
        for (std::size_t i = 0; i < target.size(); ++i) {
            targets[static_cast<std::size_t>(l_in) + i] = target[i];
        }
        targets[static_cast<std::size_t>(l_in) + target.size()] = vocab.eos;
        return cross_entropy_rows(logits, targets);
    }
    UnitSeq full = seed_units;
    full.push_back(vocab.sep);
    full.insert(full.end(), target.begin(), target.end());
    Tensor<T> logits = lm.forward_decoder_only(full, &prompts);
    std::vector<int> targets(static_cast<std::size_t>(logits.rows()), -1);
    const int base = l_in + static_cast<int>(seed_units.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        targets[static_cast<std::size_t>(base) + i] = target[i];
    }
    targets[static_cast<std::size_t>(base) + target.size()] = vocab.eos;
    return cross_entropy_rows(logits, targets);
}

namespace {

template <class T>
double validation_loss(const UnitLM<T>& lm, const PromptSet<T>& prompts,
                       const VerbalizerRef<T>& verb, const TaskSpec& task, const Dataset& val) {
    NoGradGuard guard;
    double total = 0.0;
    for (const auto& ex : val.examples) {
        total += static_cast<double>(example_loss(lm, prompts, verb, task, ex).item());
    }
    return total / static_cast<double>(val.size());
}

}  // namespace

template <class T>
TuneResult prompt_tune(const UnitLM<T>& lm, PromptSet<T>& prompts, VerbalizerRef<T> verb,
                       const TaskSpec& task, const Dataset& train, const Dataset& val,
                       const TuneConfig& cfg) {
    if (!lm.frozen()) {
        throw UsageError("backbone must be frozen before prompt tuning");
    }
    if (train.empty()) {
        throw DataError("no training examples");
    }
    if (val.empty()) {
        throw DataError("no validation examples");
    }
    if (cfg.max_steps < 1 || cfg.validate_every < 1 || cfg.patience < 1) {
        throw ConfigError("tuning needs max_steps, validate_every and patience >= 1");
    }
    const std::uint64_t hash_before = lm.param_hash();
    auto params = prompts.trainable_tensors();
    if (verb.learnable != nullptr) {
        verb.learnable->W.set_trainable(true);
        params.push_back(verb.learnable->W);
    }
    if (params.empty()) {
        throw ConfigError("nothing to tune: prompts are empty and no verbalizer is learnable");
    }
    Adam<T> opt(params, cfg.adam);
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();

    TuneResult res;
    res.best_val_loss = std::numeric_limits<double>::infinity();
    PromptSet<T> best_prompts = prompts.clone_values();
    std::vector<T> best_w;
    bool have_best = false;
    int stale = 0;
    for (int step = 1; step <= cfg.max_steps; ++step) {
        if (cursor == order.size()) {
            rng.shuffle(order);
            cursor = 0;
        }
        const Example& ex = train.examples[order[cursor++]];
        Tensor<T> loss = example_loss(lm, prompts, verb, task, ex);
        const double value = static_cast<double>(loss.item());
        if (!std::isfinite(value)) {
            throw NumericError("tuning loss became non-finite at step " + std::to_string(step));
        }
        opt.zero_grad();
        loss.backward();
        opt.step();
        res.train_losses.push_back(value);
        res.steps_run = step;
        if (step % cfg.validate_every == 0 || step == cfg.max_steps) {
            const double vl = validation_loss(lm, prompts, verb, task, val);
            res.val_losses.push_back(vl);
            if (vl < res.best_val_loss) {
                res.best_val_loss = vl;
                res.best_step = step;
                best_prompts.copy_values_from(prompts);
                if (verb.learnable != nullptr) {
                    best_w = verb.learnable->W.values();
                }
                have_best = true;
                stale = 0;
            } else if (++stale >= cfg.patience) {
                res.early_stopped = true;
                break;
            }
        }
    }
    if (have_best) {
        prompts.copy_values_from(best_prompts);
        if (verb.learnable != nullptr && !best_w.empty()) {
            verb.learnable->W.values() = best_w;
        }
    }
    if (lm.param_hash() != hash_before) {
        throw NumericError("frozen backbone parameters changed during prompt tuning");
    }
    return res;
}

namespace {

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string key, eq, value;
        if (!(ls >> key >> eq >> value)) {
            continue;
        }
        if (eq != "=") {
            throw CheckpointError("malformed config line: " + line);
        }
        kv[key] = value;
    }
    return kv;
}

const std::string& kv_need(const std::map<std::string, std::string>& kv,
                           const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) {
        throw CheckpointError("config text lacks key " + key);
    }
    return it->second;
}

}  // namespace

template <class T>
Checkpoint prompts_to_checkpoint(const PromptSet<T>& prompts, std::uint64_t backbone_hash) {
    Checkpoint ckpt;
    ckpt.component = "PROMPT";
    const int layers = prompts.stacks.empty() ? 0 : static_cast<int>(prompts.stacks[0].pk.size());
    const int d = prompts.stacks.empty() ? 0 : prompts.stacks[0].input.cols();
    std::ostringstream os;
    os << "l = " << prompts.l << "\n"
       << "use_input = " << (prompts.use_input ? 1 : 0) << "\n"
       << "use_deep = " << (prompts.use_deep ? 1 : 0) << "\n"
       << "stacks = " << prompts.stacks.size() << "\n"
       << "layers = " << layers << "\n"
       << "d_model = " << d << "\n"
       << "backbone_hash = " << backbone_hash << "\n";
    ckpt.config_text = os.str();
    for (std::size_t s = 0; s < prompts.stacks.size(); ++s) {
        const auto& stack = prompts.stacks[s];
        const std::string prefix = "s" + std::to_string(s) + ".";
        ckpt.params.push_back(tensor_to_record(prefix + "input", stack.input));
        for (std::size_t i = 0; i < stack.pk.size(); ++i) {
            ckpt.params.push_back(
                tensor_to_record(prefix + "pk." + std::to_string(i), stack.pk[i]));
        }
        for (std::size_t i = 0; i < stack.pv.size(); ++i) {
            ckpt.params.push_back(
                tensor_to_record(prefix + "pv." + std::to_string(i), stack.pv[i]));
        }
    }
    return ckpt;
}

template <class T>
PromptSet<T> prompts_from_checkpoint(const Checkpoint& ckpt, const LMConfig& config,
                                     std::uint64_t backbone_hash) {
    if (ckpt.component != "PROMPT") {
        throw CheckpointError("checkpoint component '" + ckpt.component +
                              "' is not a prompt set");
    }
    const auto kv = parse_kv_text(ckpt.config_text);
    const std::uint64_t recorded = std::stoull(kv_need(kv, "backbone_hash"));
    if (recorded != backbone_hash) {
        throw CheckpointError("prompt checkpoint was tuned against a different backbone");
    }
    const int l = std::stoi(kv_need(kv, "l"));
    const int n_stacks = std::stoi(kv_need(kv, "stacks"));
    const int layers = std::stoi(kv_need(kv, "layers"));
    const int d = std::stoi(kv_need(kv, "d_model"));
    const int want_stacks = config.variant == LMVariant::encoder_decoder ? 2 : 1;
    if (n_stacks != want_stacks || layers != config.n_layers || d != config.d_model) {
        throw CheckpointError("prompt checkpoint shape does not match the model config");
    }
    PromptSet<T> out;
    out.l = l;
    out.use_input = kv_need(kv, "use_input") == "1";
    out.use_deep = kv_need(kv, "use_deep") == "1";
    out.stacks.resize(static_cast<std::size_t>(n_stacks));
    for (int s = 0; s < n_stacks; ++s) {
        auto& stack = out.stacks[static_cast<std::size_t>(s)];
        const std::string prefix = "s" + std::to_string(s) + ".";
        stack.input = tensor_from_record<T>(ckpt.find(prefix + "input"));
        stack.input.set_trainable(true);
        for (int i = 0; i < layers; ++i) {
            Tensor<T> pk = tensor_from_record<T>(ckpt.find(prefix + "pk." + std::to_string(i)));
            Tensor<T> pv = tensor_from_record<T>(ckpt.find(prefix + "pv." + std::to_string(i)));
            pk.set_trainable(true);
            pv.set_trainable(true);
            if (pk.rows() != l || pk.cols() != d || pv.rows() != l || pv.cols() != d) {
                throw CheckpointError("prompt tensor shape mismatch in checkpoint");
            }
            stack.pk.push_back(std::move(pk));
            stack.pv.push_back(std::move(pv));
        }
        if (stack.input.rows() != l || stack.input.cols() != d) {
            throw CheckpointError("prompt tensor shape mismatch in checkpoint");
        }
    }
    return out;
}

template <class T>
Checkpoint verbalizer_to_checkpoint(const LearnableVerbalizer<T>& verb) {
    Checkpoint ckpt;
    ckpt.component = "VERB";
    std::ostringstream os;
    os << "labels = " << verb.n_labels() << "\n"
       << "vocab = " << verb.vocab_width() << "\n"
       << "tau = " << verb.tau << "\n";
    ckpt.config_text = os.str();
    ckpt.params.push_back(tensor_to_record("W", verb.W));
    return ckpt;
}

template <class T>
LearnableVerbalizer<T> verbalizer_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.component != "VERB") {
        throw CheckpointError("checkpoint component '" + ckpt.component +
                              "' is not a verbalizer");
    }
    const auto kv = parse_kv_text(ckpt.config_text);
    const int labels = std::stoi(kv_need(kv, "labels"));
    const int vocab = std::stoi(kv_need(kv, "vocab"));
    LearnableVerbalizer<T> verb;
    verb.tau = std::stod(kv_need(kv, "tau"));
    verb.W = tensor_from_record<T>(ckpt.find("W"));
    verb.W.set_trainable(true);
    if (verb.W.rows() != labels || verb.W.cols() != vocab) {
        throw CheckpointError("verbalizer weight shape mismatch in checkpoint");
    }
    if (verb.tau <= 0.0) {
        throw CheckpointError("verbalizer temperature must be positive");
    }
    return verb;
}

#define UPROMPT_INSTANTIATE_PROMPTS(T)                                                         \
    template struct PromptSet<T>;                                                              \
    template PromptSet<T> init_prompts<T>(const LMConfig&, int, std::uint64_t);                \
    template TrainableCount count_trainable<T>(const PromptSet<T>&,                            \
                                               const LearnableVerbalizer<T>*);                 \
    template Tensor<T> apply_input_prompts<T>(const Tensor<T>&, const Tensor<T>&);             \
    template std::pair<Tensor<T>, Tensor<T>> apply_deep_prompts<T>(                            \
        const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                \
        const Tensor<T>&);                                                                     \
    template Tensor<T> feedback_states<T>(const UnitLM<T>&, const LearnableVerbalizer<T>&,   \
                                          const UnitSeq&, const std::vector<int>&);          \
    template Tensor<T> example_loss<T>(const UnitLM<T>&, const PromptSet<T>&,                  \
                                       const VerbalizerRef<T>&, const TaskSpec&,               \
                                       const Example&);                                        \
    template TuneResult prompt_tune<T>(const UnitLM<T>&, PromptSet<T>&, VerbalizerRef<T>,      \
                                       const TaskSpec&, const Dataset&, const Dataset&,        \
                                       const TuneConfig&);                                     \
    template Checkpoint prompts_to_checkpoint<T>(const PromptSet<T>&, std::uint64_t);          \
    template PromptSet<T> prompts_from_checkpoint<T>(const Checkpoint&, const LMConfig&,       \
                                                     std::uint64_t);                           \
    template Checkpoint verbalizer_to_checkpoint<T>(const LearnableVerbalizer<T>&);            \
    template LearnableVerbalizer<T> verbalizer_from_checkpoint<T>(const Checkpoint&);

UPROMPT_INSTANTIATE_PROMPTS(float)
UPROMPT_INSTANTIATE_PROMPTS(double)

#undef UPROMPT_INSTANTIATE_PROMPTS

}  // namespace uprompt
