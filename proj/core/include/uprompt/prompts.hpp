#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uprompt/adam.hpp"
#include "uprompt/dataset.hpp"
#include "uprompt/unitlm.hpp"
#include "uprompt/verbalizer.hpp"

namespace uprompt {

/// Prompts for one transformer stack: the input prompt block plus per-layer
/// key/value prompts, all l x d and all trainable.
template <class T>
struct StackPrompts {
    Tensor<T> input;
    std::vector<Tensor<T>> pk;
    std::vector<Tensor<T>> pv;
};

/// The complete trainable prompt state for a backbone: one stack entry for a
/// decoder-only model, two (encoder, decoder) for an encoder-decoder.
/// use_input / use_deep toggle the two mechanisms independently for ablation.
template <class T>
struct PromptSet {
    int l = 0;
    bool use_input = true;
    bool use_deep = true;
    std::vector<StackPrompts<T>> stacks;

    const StackPrompts<T>* encoder_prompts() const {
        return stacks.size() == 2 ? &stacks[0] : nullptr;
    }
    const StackPrompts<T>* decoder_prompts() const {
        return stacks.empty() ? nullptr : &stacks.back();
    }
    /// Effective prepended input length for a stack (0 when disabled).
    int input_len() const { return use_input ? l : 0; }

    std::vector<Tensor<T>> trainable_tensors() const;
    /// Enumerated trainable scalar count over all prompt tensors.
    long param_count() const;
    /// Deep-copies values into a fresh set (used for early-stopping snapshots).
    PromptSet clone_values() const;
    void copy_values_from(const PromptSet& other);
};

/// Fresh prompts, every entry i.i.d. normal(0, 0.02), deterministic in seed.
/// l = 0 yields empty tensors and zero trainable parameters.
template <class T>
PromptSet<T> init_prompts(const LMConfig& config, int l, std::uint64_t seed);

/// Closed-form trainable-prompt count for a config: stacks*l*d input prompts
/// plus layers*2*l*d deep prompts (layers summed over stacks).
long prompt_param_formula(const LMConfig& config, int l);

struct TrainableCount {
    long prompts = 0;
    long verbalizer = 0;
    long total = 0;
};

/// Trainable-parameter accounting, reported with and without the learnable
/// verbalizer contribution (|Y| x |V|).
template <class T>
TrainableCount count_trainable(const PromptSet<T>& prompts,
                               const LearnableVerbalizer<T>* verb);

/// Concat(p_input, sequence): the input-prompt prepend. Identity when l = 0.
template <class T>
Tensor<T> apply_input_prompts(const Tensor<T>& h1, const Tensor<T>& p_input);

/// (K, V) for one attention layer with deep prompts prepended before the
/// projections: K = Concat(pk, h) Wk, V = Concat(pv, h) Wv.
template <class T>
std::pair<Tensor<T>, Tensor<T>> apply_deep_prompts(const Tensor<T>& h, const Tensor<T>& pk,
                                                   const Tensor<T>& pv, const Tensor<T>& wk,
                                                   const Tensor<T>& wv);

struct TuneConfig {
    int max_steps = 2000;
    AdamConfig adam{.lr = 5e-3};  // beta defaults (0.9, 0.98)
    int validate_every = 100;
    int patience = 5;  // validation rounds without improvement before stopping
    std::uint64_t seed = 0;
};

struct TuneResult {
    std::vector<double> train_losses;
    std::vector<double> val_losses;
    int steps_run = 0;
    int best_step = 0;
    double best_val_loss = 0.0;
    bool early_stopped = false;
};

/// Either verbalizer kind; exactly one is set for label tasks, neither for
/// raw unit generation.
template <class T>
struct VerbalizerRef {
    const FixedVerbalizer* fixed = nullptr;
    LearnableVerbalizer<T>* learnable = nullptr;
};

/// Decoder input rows for label feedback with a learnable verbalizer: the
/// embedded base tokens followed by e_hat(y) + positional rows, one per
/// label. Used for teacher forcing in training and for committed prefixes
/// during autoregressive decoding.
template <class T>
Tensor<T> feedback_states(const UnitLM<T>& lm, const LearnableVerbalizer<T>& verb,
                          const UnitSeq& base_ids, const std::vector<int>& labels);

/// Cross-entropy of one example's target framing (teacher-forced), the unit
/// of work shared by prompt_tune and its validation passes.
template <class T>
Tensor<T> example_loss(const UnitLM<T>& lm, const PromptSet<T>& prompts,
                       const VerbalizerRef<T>& verb, const TaskSpec& task, const Example& ex);

/// Tunes prompts (and the learnable verbalizer, when given) against a frozen
/// backbone with early stopping on validation loss; the backbone itself must
/// be frozen and is verified unchanged by hash. Restores the best-validation
/// snapshot before returning.
template <class T>
TuneResult prompt_tune(const UnitLM<T>& lm, PromptSet<T>& prompts, VerbalizerRef<T> verb,
                       const TaskSpec& task, const Dataset& train, const Dataset& val,
                       const TuneConfig& cfg);

/// Prompt checkpoints: SPUL container tagged "PROMPT", recording the backbone
/// hash they were tuned against. Loading against a different backbone throws.
template <class T>
Checkpoint prompts_to_checkpoint(const PromptSet<T>& prompts, std::uint64_t backbone_hash);
template <class T>
PromptSet<T> prompts_from_checkpoint(const Checkpoint& ckpt, const LMConfig& config,
                                     std::uint64_t backbone_hash);

/// Verbalizer checkpoints: SPUL container tagged "VERB".
template <class T>
Checkpoint verbalizer_to_checkpoint(const LearnableVerbalizer<T>& verb);
template <class T>
LearnableVerbalizer<T> verbalizer_from_checkpoint(const Checkpoint& ckpt);

}  // namespace uprompt
