#pragma once

#include <memory>
#include <vector>

#include "uprompt/prompts.hpp"

namespace uprompt {

enum class DecodeStrategy { greedy, beam };

struct DecodeConfig {
    DecodeStrategy strategy = DecodeStrategy::beam;
    int beam_size = 5;
    int max_len = 64;
    /// Length-normalization exponent: score = logprob / (len + 1)^alpha.
    double length_alpha = 0.0;

    void validate() const;
};

struct Hypothesis {
    std::vector<int> units;  // emitted ids in the decode space, <eos> excluded
    double logprob = 0.0;
    bool finished = false;
};

double hypothesis_score(const Hypothesis& hyp, double alpha);

/// A decode search space: some id range with a stop id and per-step
/// conditional log-probabilities. Scorers recompute the full prefix each
/// step, trading speed for an implementation the tests can enumerate.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual int space_size() const = 0;
    virtual int eos_id() const = 0;
    virtual std::vector<double> step_logprobs(const std::vector<int>& prefix) const = 0;
};

/// Next-unit distribution of a unit LM conditioned on a source sequence:
/// decoder-only models read [source, <sep>, prefix]; encoder-decoder models
/// encode the source once and read [<bos>, prefix].
template <class T>
class UnitScorer : public Scorer {
public:
    UnitScorer(const UnitLM<T>& lm, const PromptSet<T>* prompts, UnitSeq source);

    int space_size() const override;
    int eos_id() const override;
    std::vector<double> step_logprobs(const std::vector<int>& prefix) const override;

private:
    const UnitLM<T>& lm_;
    const PromptSet<T>* prompts_;
    UnitSeq source_;
    Tensor<T> memory_;  // cached encoder states (encoder-decoder only)
};

/// Label decode space |Y|+1 for a learnable verbalizer: transformed class
/// logits plus the raw <eos> logit as the stop id |Y|. Committed labels feed
/// back into the decoder as e_hat(y) rows.
template <class T>
class LabelScorer : public Scorer {
public:
    LabelScorer(const UnitLM<T>& lm, const PromptSet<T>* prompts,
                const LearnableVerbalizer<T>& verb, UnitSeq source);

    int space_size() const override;
    int eos_id() const override;
    std::vector<double> step_logprobs(const std::vector<int>& prefix) const override;

private:
    const UnitLM<T>& lm_;
    const PromptSet<T>* prompts_;
    const LearnableVerbalizer<T>& verb_;
    UnitSeq base_ids_;
    Tensor<T> memory_;  // cached encoder states (encoder-decoder only)
    bool encdec_ = false;
};

/// Beam search over a scorer. Hypotheses are ranked by length-normalized
/// score; ties prefer finished hypotheses, then the lexicographically
/// smaller id sequence. Returns the final beam, best first.
std::vector<Hypothesis> beam_decode(const Scorer& scorer, const DecodeConfig& cfg);

/// Greedy decoding; ties take the lowest id. Equals beam_decode with
/// beam_size 1.
Hypothesis greedy_decode(const Scorer& scorer, const DecodeConfig& cfg);

/// Dispatches on cfg.strategy and returns the best hypothesis.
Hypothesis decode_best(const Scorer& scorer, const DecodeConfig& cfg);

/// Log-probability of emitting exactly `target` (optionally followed by the
/// stop id) under the scorer's step distributions.
double forced_logprob(const Scorer& scorer, const std::vector<int>& target, bool include_eos);

/// One decoded example in task terms: labels for label tasks (fixed
/// verbalizers report unmapped emitted units as -1), raw units for
/// generation.
struct TaskPrediction {
    std::vector<int> labels;
    UnitSeq units;
    double logprob = 0.0;
    bool finished = false;
};

/// Runs the decode side of a task on one example: builds the right scorer
/// for the verbalizer kind, decodes, and maps the hypothesis back to task
/// space. Generation tasks condition on the continuation seed segment.
template <class T>
TaskPrediction predict_example(const UnitLM<T>& lm, const PromptSet<T>& prompts,
                               const VerbalizerRef<T>& verb, const TaskSpec& task,
                               const Example& ex, const DecodeConfig& cfg);

}  // namespace uprompt
