#include "uprompt/verbalizer.hpp"

#include <algorithm>
#include <fstream>

#include "uprompt/rng.hpp"

namespace uprompt {

int FixedVerbalizer::unit_for(int label) const {
    if (label < 0 || label >= n_labels()) {
        throw IndexError("verbalizer label " + std::to_string(label) + " out of range");
    }
    return label_to_unit[static_cast<std::size_t>(label)];
}

int FixedVerbalizer::label_of(int unit) const {
    auto it = unit_to_label.find(unit);
    return it == unit_to_label.end() ? unmapped : it->second;
}

FixedVerbalizer fixed_from_seed(int n_labels, const Vocabulary& vocab, std::uint64_t seed) {
    if (n_labels < 1) {
        throw ConfigError("verbalizer needs at least one label");
    }
    const int pool = vocab.n_units();
    if (n_labels > pool) {
        throw VocabError("cannot map " + std::to_string(n_labels) + " labels onto " +
                         std::to_string(pool) + " units injectively");
    }
    std::vector<int> units(static_cast<std::size_t>(pool));
    for (int u = 0; u < pool; ++u) {
        units[static_cast<std::size_t>(u)] = u;
    }
    Rng rng(seed);
    rng.shuffle(units);
    FixedVerbalizer verb;
    verb.label_to_unit.assign(units.begin(), units.begin() + n_labels);
    for (int y = 0; y < n_labels; ++y) {
        verb.unit_to_label[verb.label_to_unit[static_cast<std::size_t>(y)]] = y;
    }
    return verb;
}

template <class T>
LearnableVerbalizer<T> make_learnable_verbalizer(int n_labels, const Vocabulary& vocab,
                                                 double tau) {
    if (n_labels < 1) {
        throw ConfigError("verbalizer needs at least one label");
    }
    if (tau <= 0.0) {
        throw ConfigError("verbalizer temperature must be positive");
    }
    LearnableVerbalizer<T> verb;
    verb.W = Tensor<T>::zeros({n_labels, vocab.size});
    verb.W.set_trainable(true);
    verb.tau = tau;
    return verb;
}

template <class T>
Tensor<T> transform_logits(const LearnableVerbalizer<T>& verb, const Tensor<T>& z) {
    if (z.rank() == 1) {
        if (z.numel() != static_cast<std::size_t>(verb.vocab_width())) {
            throw ShapeError("logit vector width does not match verbalizer");
        }
        return matvec(verb.W, z);
    }
    if (z.rank() == 2 && z.rows() == 1 && z.cols() == verb.vocab_width()) {
        return matmul_nt(z, verb.W);
    }
    throw ShapeError("transform_logits expects |V| logits as rank-1 or 1 x |V|");
}

template <class T>
int predict_label(const std::vector<T>& zhat) {
    if (zhat.empty()) {
        throw ShapeError("cannot take argmax of empty class logits");
    }
    return argmax(zhat);
}

template <class T>
Tensor<T> class_embeddings(const LearnableVerbalizer<T>& verb, const Tensor<T>& embed) {
    if (embed.rank() != 2 || embed.rows() != verb.vocab_width()) {
        throw ShapeError("embedding table must be |V| x d for this verbalizer");
    }
    Tensor<T> weights = softmax_rows(scale(verb.W, static_cast<T>(1.0 / verb.tau)));
    return matmul(weights, embed);
}

template <class T>
Tensor<T> augmented_logits(const LearnableVerbalizer<T>& verb, const Tensor<T>& z_row,
                           int eos_id) {
    if (z_row.rank() != 2 || z_row.rows() != 1 || z_row.cols() != verb.vocab_width()) {
        throw ShapeError("augmented_logits expects a 1 x |V| logit row");
    }
    if (eos_id < 0 || eos_id >= verb.vocab_width()) {
        throw IndexError("eos id out of vocabulary range");
    }
    Tensor<T> classes = matmul_nt(z_row, verb.W);
    Tensor<T> stop = slice_cols(z_row, eos_id, eos_id + 1);
    return concat_cols(classes, stop);
}

template <class T>
std::vector<WeightExportRow> export_weights(const LearnableVerbalizer<T>& verb,
                                            const std::vector<UnitAnnotation>& annotations,
                                            int top_n) {
    if (top_n < 1) {
        throw ConfigError("export_weights needs top_n >= 1");
    }
    const int width = verb.vocab_width();
    top_n = std::min(top_n, width);
    std::vector<WeightExportRow> rows;
    rows.reserve(static_cast<std::size_t>(verb.n_labels() * top_n));
    for (int y = 0; y < verb.n_labels(); ++y) {
        const T* wrow = verb.W.values().data() + static_cast<std::size_t>(y) * width;
        std::vector<int> order(static_cast<std::size_t>(width));
        for (int u = 0; u < width; ++u) {
            order[static_cast<std::size_t>(u)] = u;
        }
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return wrow[a] > wrow[b];  // stable keeps lower unit id first on ties
        });
        for (int r = 0; r < top_n; ++r) {
            const int unit = order[static_cast<std::size_t>(r)];
            WeightExportRow row;
            row.label = y;
            row.rank = r;
            row.unit = unit;
            row.weight = static_cast<double>(wrow[unit]);
            if (unit < static_cast<int>(annotations.size())) {
                row.symbol = annotations[static_cast<std::size_t>(unit)].symbol;
                row.purity = annotations[static_cast<std::size_t>(unit)].purity;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

void write_weights_csv(const std::vector<WeightExportRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open " + path + " for writing");
    }
    out << "class,rank,unit,weight,symbol,symbol_purity\n";
    for (const auto& row : rows) {
        out << row.label << ',' << row.rank << ',' << row.unit << ',' << row.weight << ','
            << row.symbol << ',' << row.purity << '\n';
    }
    if (!out) {
        throw DataError("write to " + path + " failed");
    }
}

#define UPROMPT_INSTANTIATE_VERB(T)                                                          \
    template LearnableVerbalizer<T> make_learnable_verbalizer<T>(int, const Vocabulary&,     \
                                                                 double);                    \
    template Tensor<T> transform_logits<T>(const LearnableVerbalizer<T>&, const Tensor<T>&); \
    template int predict_label<T>(const std::vector<T>&);                                    \
    template Tensor<T> class_embeddings<T>(const LearnableVerbalizer<T>&, const Tensor<T>&); \
    template Tensor<T> augmented_logits<T>(const LearnableVerbalizer<T>&, const Tensor<T>&,  \
                                           int);                                             \
    template std::vector<WeightExportRow> export_weights<T>(                                 \
        const LearnableVerbalizer<T>&, const std::vector<UnitAnnotation>&, int);

UPROMPT_INSTANTIATE_VERB(float)
UPROMPT_INSTANTIATE_VERB(double)

#undef UPROMPT_INSTANTIATE_VERB

}  // namespace uprompt
