#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "uprompt/ops.hpp"
#include "uprompt/tensor.hpp"
#include "uprompt/vocab.hpp"

namespace uprompt {

/// Injective random map label -> unit id. A model may emit units outside the
/// image; label_of reports those as `unmapped`, which metrics score as wrong
/// rather than raising.
struct FixedVerbalizer {
    static constexpr int unmapped = -1;

    std::vector<int> label_to_unit;
    std::unordered_map<int, int> unit_to_label;

    int n_labels() const { return static_cast<int>(label_to_unit.size()); }
    int unit_for(int label) const;
    int label_of(int unit) const;
};

/// Uniform injective assignment over the non-reserved vocabulary.
FixedVerbalizer fixed_from_seed(int n_labels, const Vocabulary& vocab, std::uint64_t seed);

/// Trainable linear verbalizer W (|Y| x |V|) with softmax temperature tau.
/// W starts at zero: transformed logits are uninformative and every class
/// embedding is the uniform embedding mean, a neutral initial state.
template <class T>
struct LearnableVerbalizer {
    Tensor<T> W;
    double tau = 0.01;

    int n_labels() const { return W.rows(); }
    int vocab_width() const { return W.cols(); }
};

template <class T>
LearnableVerbalizer<T> make_learnable_verbalizer(int n_labels, const Vocabulary& vocab,
                                                 double tau = 0.01);

/// zhat = W . z. Accepts a rank-1 logits vector (returns rank-1 |Y|) or a
/// 1 x |V| row (returns 1 x |Y|); differentiable w.r.t. both W and z.
template <class T>
Tensor<T> transform_logits(const LearnableVerbalizer<T>& verb, const Tensor<T>& z);

/// argmax over transformed class logits; ties take the lowest class index.
template <class T>
int predict_label(const std::vector<T>& zhat);

/// Class embedding rows: e_hat(y) = sum_i softmax(W_y / tau)_i * e(u_i),
/// returned as a |Y| x d matrix. Used as the decoder feedback embedding for
/// predicted labels during autoregressive generation.
template <class T>
Tensor<T> class_embeddings(const LearnableVerbalizer<T>& verb, const Tensor<T>& embed);

/// Search-space logits for decoding with a learnable verbalizer: the |Y|
/// transformed logits with the raw <eos> logit appended, giving a |Y|+1
/// space whose last index means "stop". z_row is 1 x |V|.
template <class T>
Tensor<T> augmented_logits(const LearnableVerbalizer<T>& verb, const Tensor<T>& z_row,
                           int eos_id);

/// Dominant latent symbol for a unit plus the fraction of the unit's
/// occurrences carrying that symbol (from corpus metadata).
struct UnitAnnotation {
    int symbol = -1;
    double purity = 0.0;
    int occurrences = 0;
};

struct WeightExportRow {
    int label = 0;
    int rank = 0;
    int unit = 0;
    double weight = 0.0;
    int symbol = -1;
    double purity = 0.0;
};

/// Per class, the top_n units by verbalizer weight with their annotations;
/// top_n is clamped to the vocabulary width. Ties rank lower unit ids first.
template <class T>
std::vector<WeightExportRow> export_weights(const LearnableVerbalizer<T>& verb,
                                            const std::vector<UnitAnnotation>& annotations,
                                            int top_n);

void write_weights_csv(const std::vector<WeightExportRow>& rows, const std::string& path);

}  // namespace uprompt
