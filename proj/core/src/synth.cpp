#include "uprompt/synth.hpp"

#include <string>

#include "uprompt/rng.hpp"

namespace uprompt {

void SynthSpec::validate() const {
    if (n_symbols < 2) {
        throw ConfigError("synth spec needs at least two filler symbols");
    }
    if (kind == TaskKind::classification) {
        if (n_classes < 2) {
            throw ConfigError("classification synth spec needs n_classes >= 2");
        }
    } else if (n_classes != 0) {
        throw ConfigError("non-classification synth spec must have n_classes == 0");
    }
    if (units_per_symbol < 1) {
        throw ConfigError("synth spec needs units_per_symbol >= 1");
    }
    if (min_len < 1 || max_len < min_len) {
        throw ConfigError("synth spec needs 1 <= min_len <= max_len");
    }
    if (min_reps < 1 || max_reps < min_reps) {
        throw ConfigError("synth spec needs 1 <= min_reps <= max_reps");
    }
    if (chain_bias < 0.0 || chain_bias > 1.0) {
        throw ConfigError("synth spec chain_bias must lie in [0,1]");
    }
    if (emission_noise < 0.0 || emission_noise >= 1.0) {
        throw ConfigError("synth spec emission_noise must lie in [0,1)");
    }
}

std::pair<int, int> SynthSpec::pool(int symbol) const {
    if (symbol < 0 || symbol >= total_symbols()) {
        throw IndexError("symbol " + std::to_string(symbol) + " outside grammar of " +
                         std::to_string(total_symbols()) + " symbols");
    }
    return {symbol * units_per_symbol, (symbol + 1) * units_per_symbol};
}

int SynthSpec::symbol_of_unit(int unit) const {
    if (unit < 0 || unit >= n_units_used()) {
        return -1;
    }
    return unit / units_per_symbol;
}

SynthSpec cls8_spec() {
    SynthSpec s;
    s.kind = TaskKind::classification;
    s.n_classes = 8;
    return s;
}

SynthSpec trans12_spec() {
    SynthSpec s;
    s.kind = TaskKind::sequence;
    return s;
}

SynthSpec cont_spec() {
    SynthSpec s;
    s.kind = TaskKind::generation;
    s.min_len = 16;
    s.max_len = 28;
    return s;
}

namespace {

std::vector<int> sample_filler_chain(const SynthSpec& spec, Rng& rng) {
    const int len = rng.range(spec.min_len, spec.max_len);
    std::vector<int> symbols;
    symbols.reserve(static_cast<std::size_t>(len));
    int s = rng.below_int(spec.n_symbols);
    symbols.push_back(s);
    for (int i = 1; i < len; ++i) {
        int next;
        if (rng.uniform() < spec.chain_bias) {
            next = (s + 1) % spec.n_symbols;
        } else {
            // uniform over the other symbols, excluding s itself
            next = rng.below_int(spec.n_symbols - 1);
            if (next >= s) ++next;
        }
        symbols.push_back(next);
        s = next;
    }
    return symbols;
}

int emit_unit(const SynthSpec& spec, int symbol, Rng& rng) {
    int source = symbol;
    if (spec.emission_noise > 0.0 && rng.uniform() < spec.emission_noise) {
        source = rng.below_int(spec.total_symbols());
    }
    const auto [lo, hi] = spec.pool(source);
    return lo + rng.below_int(hi - lo);
}

SynthExample make_example(const SynthSpec& spec, Rng& rng) {
    SynthExample ex;
    std::vector<int> symbols;
    if (spec.kind == TaskKind::classification) {
        ex.class_id = rng.below_int(spec.n_classes);
        const int marker = spec.marker_symbol(ex.class_id);
        if (spec.marker_pos != MarkerPosition::back) {
            symbols.push_back(marker);
        }
        const auto filler = sample_filler_chain(spec, rng);
        symbols.insert(symbols.end(), filler.begin(), filler.end());
        if (spec.marker_pos != MarkerPosition::front) {
            symbols.push_back(marker);
        }
        ex.labels = {ex.class_id};
    } else {
        symbols = sample_filler_chain(spec, rng);
    }
    for (int sym : symbols) {
        const int unit = emit_unit(spec, sym, rng);
        const int reps = rng.range(spec.min_reps, spec.max_reps);
        for (int r = 0; r < reps; ++r) {
            ex.surface_units.push_back(unit);
        }
        // adjacent occurrences can collide only under emission noise; dedup
        // merges them, keeping the first occurrence's symbol
        if (ex.units.empty() || ex.units.back() != unit) {
            ex.units.push_back(unit);
            ex.unit_symbols.push_back(sym);
        }
    }
    if (spec.kind == TaskKind::sequence) {
        ex.labels = ex.unit_symbols;  // symbol ids are the label ids
    }
    return ex;
}

}  // namespace

std::vector<SynthExample> synth_corpus(const SynthSpec& spec, std::uint64_t seed, int n) {
    spec.validate();
    if (n < 0) {
        throw ConfigError("synth_corpus needs n >= 0");
    }
    Rng rng(seed);
    std::vector<SynthExample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.push_back(make_example(spec, rng));
    }
    return out;
}

std::vector<UnitSeq> synth_lm_corpus(const SynthSpec& spec, const Vocabulary& vocab,
                                     std::uint64_t seed, int n) {
    spec.validate();
    if (n < 0) {
        throw ConfigError("synth_lm_corpus needs n >= 0");
    }
    if (spec.n_units_used() > vocab.n_units()) {
        throw ConfigError("synth grammar uses " + std::to_string(spec.n_units_used()) +
                          " units but the vocabulary has only " +
                          std::to_string(vocab.n_units()));
    }
    Rng rng(seed);
    std::vector<UnitSeq> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        SynthExample ex = make_example(spec, rng);
        UnitSeq stream = ex.units;
        if (spec.kind == TaskKind::classification && i % 2 == 0) {
            // separator-formatted stream: x-units, <sep>, the first marker
            // unit — the answer-after-separator convention
            int echo = -1;
            for (std::size_t j = 0; j < ex.unit_symbols.size(); ++j) {
                if (ex.unit_symbols[j] >= spec.n_symbols) {
                    echo = ex.units[j];
                    break;
                }
            }
            if (echo >= 0) {
                stream.push_back(vocab.sep);
                stream.push_back(echo);
            }
        }
        out.push_back(std::move(stream));
    }
    return out;
}

FeatureMatrix features_for_units(const UnitSeq& surface, int n_units, int dim, double spread,
                                 std::uint64_t center_seed) {
    if (n_units < 1 || dim < 1) {
        throw ConfigError("features_for_units needs n_units >= 1 and dim >= 1");
    }
    if (spread < 0.0) {
        throw ConfigError("features_for_units needs spread >= 0");
    }
    // unit centers are a pure function of (center_seed, n_units, dim)
    Rng centers_rng(center_seed);
    std::vector<double> centers(static_cast<std::size_t>(n_units) * dim);
    for (auto& c : centers) {
        c = centers_rng.normal();
    }
    Rng noise_rng = centers_rng.fork();
    FeatureMatrix f;
    f.frames = static_cast<int>(surface.size());
    f.dim = dim;
    f.values.resize(surface.size() * static_cast<std::size_t>(dim));
    for (std::size_t t = 0; t < surface.size(); ++t) {
        const int u = surface[t];
        if (u < 0 || u >= n_units) {
            throw VocabError("unit " + std::to_string(u) + " outside feature center table of " +
                             std::to_string(n_units));
        }
        for (int d = 0; d < dim; ++d) {
            f.values[t * static_cast<std::size_t>(dim) + d] =
                static_cast<float>(centers[static_cast<std::size_t>(u) * dim + d] +
                                   spread * noise_rng.normal());
        }
    }
    return f;
}

}  // namespace uprompt
