#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uprompt/adam.hpp"
#include "uprompt/checkpoint.hpp"
#include "uprompt/ops.hpp"
#include "uprompt/rng.hpp"
#include "uprompt/tensor.hpp"
#include "uprompt/vocab.hpp"

namespace uprompt {

template <class T>
struct PromptSet;
template <class T>
struct StackPrompts;

enum class LMVariant { decoder_only, encoder_decoder };

struct LMConfig {
    LMVariant variant = LMVariant::decoder_only;
    int n_layers = 2;  // per stack
    int n_heads = 4;
    int d_model = 64;
    int d_ffn = 256;
    int n_units = 100;  // vocabulary is n_units + 5 reserved ids
    int max_positions = 256;
    double dropout = 0.1;

    int vocab_size() const { return n_units + Vocabulary::reserved_count; }
    int head_dim() const { return d_model / n_heads; }
    void validate() const;
    std::string to_text() const;
    static LMConfig from_text(const std::string& text);
};

template <class T>
struct AttentionParams {
    Tensor<T> wq, wk, wv, wo;  // each d_model x d_model
};

template <class T>
struct LayerParams {
    Tensor<T> ln1_g, ln1_b;
    AttentionParams<T> attn;
    bool has_cross = false;
    Tensor<T> lnc_g, lnc_b;
    AttentionParams<T> cross;
    Tensor<T> ln2_g, ln2_b;
    Tensor<T> w1, b1, w2, b2;  // ffn
};

template <class T>
struct StackParams {
    std::vector<LayerParams<T>> layers;
    Tensor<T> lnf_g, lnf_b;  // final norm
};

/// Multi-head scaled-dot-product attention sublayer. kv_src provides keys and
/// values; deep prompt rows pk/pv (each l x d) are prepended to kv_src before
/// the K/V projections, so every query row normalizes over l + |kv| keys while
/// the output keeps |q_src| rows. causal limits query row r to key prefix
/// l + r + 1. Exposed so tests can probe it with hand-built weights.
template <class T>
Tensor<T> attention_block(const AttentionParams<T>& w, int n_heads, const Tensor<T>& q_src,
                          const Tensor<T>& kv_src, bool causal, const Tensor<T>* pk,
                          const Tensor<T>* pv);

/// Frozen-capable transformer over discrete units: a causal decoder-only
/// stack, or an encoder-decoder pair with cross-attention. The embedding
/// table is shared with the output projection (tied, no bias).
template <class T>
class UnitLM {
public:
    UnitLM(LMConfig config, std::uint64_t seed);

    const LMConfig& config() const { return config_; }
    const Vocabulary& vocab() const { return vocab_; }
    const Tensor<T>& embedding() const { return embed_; }
    const Tensor<T>& positions() const { return pos_; }
    const StackParams<T>& encoder_stack() const;
    const StackParams<T>& decoder_stack() const { return dec_; }

    /// Canonical (name, tensor) list; order is stable and defines the
    /// checkpoint layout and the parameter hash.
    std::vector<std::pair<std::string, Tensor<T>>> named_params() const;
    void set_trainable(bool trainable);
    /// Marks every backbone parameter non-trainable; forward still works.
    void freeze();
    bool frozen() const { return frozen_; }
    /// FNV-1a over all parameter payload bytes in canonical order.
    std::uint64_t param_hash() const;
    std::size_t param_count() const;

    /// e(u) + positional rows for a unit sequence (any variant).
    Tensor<T> embed_units(const UnitSeq& units) const;
    /// Encoder input g1 (encoder-decoder only).
    Tensor<T> embed_source(const UnitSeq& units) const;
    /// Decoder-only input layout [x, <sep>, y-prefix] embedded with positions.
    Tensor<T> embed_decoder_input(const UnitSeq& source, const UnitSeq& prefix) const;

    /// Encoder pass over embedded input (prepends input/deep prompts from the
    /// prompt set's encoder stack when given).
    Tensor<T> encode(const Tensor<T>& g1, const PromptSet<T>* prompts,
                     Rng* drop_rng = nullptr) const;
    /// Decoder pass: causal self-attention, plus cross-attention into memory
    /// when the variant has an encoder. h1 is the embedded decoder input.
    Tensor<T> decode_states(const Tensor<T>& h1, const Tensor<T>* memory,
                            const PromptSet<T>* prompts, Rng* drop_rng = nullptr) const;
    /// Tied output projection h . e^T.
    Tensor<T> logits_from_states(const Tensor<T>& h) const;

    /// Full decoder-only pass: tokens -> logits rows (prompt rows included
    /// when input prompts are active).
    Tensor<T> forward_decoder_only(const UnitSeq& tokens, const PromptSet<T>* prompts,
                                   Rng* drop_rng = nullptr) const;
    /// Full encoder-decoder pass with teacher-forced decoder tokens.
    Tensor<T> forward_encdec(const UnitSeq& source, const UnitSeq& dec_tokens,
                             const PromptSet<T>* prompts, Rng* drop_rng = nullptr) const;

    Checkpoint to_checkpoint() const;
    static UnitLM from_checkpoint(const Checkpoint& ckpt);

private:
    friend struct PromptSet<T>;
    LMConfig config_;
    Vocabulary vocab_;
    Tensor<T> embed_;  // |V| x d
    Tensor<T> pos_;    // max_positions x d
    bool has_encoder_ = false;
    StackParams<T> enc_;
    StackParams<T> dec_;
    bool frozen_ = false;

    Tensor<T> run_stack(const StackParams<T>& stack, Tensor<T> h, bool causal,
                        const Tensor<T>* memory, const StackPrompts<T>* deep, bool use_deep,
                        Rng* drop_rng) const;
    void check_length(int content_len, int prompt_len) const;
};

/// Span corruption for denoising pretraining: contiguous spans covering about
/// mask_ratio of the sequence are each replaced by a single <mask>.
struct NoiseSpec {
    double mask_ratio = 0.3;
    int min_spans = 1;
    int max_spans = 3;
    void validate() const;
};

UnitSeq corrupt_spans(const UnitSeq& units, const NoiseSpec& noise, const Vocabulary& vocab,
                      Rng& rng);

struct PretrainConfig {
    int epochs = 10;
    AdamConfig adam{.lr = 3e-3, .clip_norm = 1.0};
    std::uint64_t seed = 0;
    NoiseSpec noise;  // denoising only
};

/// Next-token pretraining for the decoder-only variant on streams
/// units + <eos>. Returns the mean loss per epoch.
template <class T>
std::vector<double> pretrain_next_token(UnitLM<T>& lm, const std::vector<UnitSeq>& corpus,
                                        const PretrainConfig& cfg);

/// Denoising pretraining for the encoder-decoder variant: the encoder reads
/// the corrupted sequence, the decoder reconstructs the original.
template <class T>
std::vector<double> pretrain_denoise(UnitLM<T>& lm, const std::vector<UnitSeq>& corpus,
                                     const PretrainConfig& cfg);

/// Teacher-forced argmax accuracy of the pretraining objectives.
template <class T>
double next_token_accuracy(const UnitLM<T>& lm, const std::vector<UnitSeq>& corpus);
template <class T>
double copy_accuracy(const UnitLM<T>& lm, const std::vector<UnitSeq>& corpus);

}  // namespace uprompt
