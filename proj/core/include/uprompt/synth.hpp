#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "uprompt/unitizer.hpp"
#include "uprompt/vocab.hpp"

namespace uprompt {

enum class TaskKind { classification, sequence, generation };

enum class MarkerPosition { front, back, both };

/// Generator for labeled unit corpora: a Markov chain over latent "filler"
/// symbols plus per-class marker symbols, each symbol owning a disjoint pool
/// of unit ids (the many-to-one emission map). Surface sequences repeat each
/// emitted unit 1..max_reps times so the deduplication stage has real work.
struct SynthSpec {
    TaskKind kind = TaskKind::generation;
    int n_classes = 0;       // marker symbols; > 0 only for classification
    int n_symbols = 12;      // filler symbols (the label set for sequence tasks)
    int units_per_symbol = 3;
    int min_len = 4;         // filler symbols per utterance
    int max_len = 10;
    int min_reps = 1;        // surface repetitions per emitted unit
    int max_reps = 3;
    MarkerPosition marker_pos = MarkerPosition::both;
    /// Probability that symbol s is followed by (s+1) mod n_symbols; the
    /// rest of the mass spreads uniformly over the other symbols. Never
    /// self-transitions, which keeps dedup output aligned 1:1 with symbols.
    double chain_bias = 0.6;
    /// Probability an emission is drawn from a uniformly random pool instead
    /// of the symbol's own pool.
    double emission_noise = 0.0;

    void validate() const;
    int total_symbols() const { return n_symbols + n_classes; }
    int n_units_used() const { return total_symbols() * units_per_symbol; }
    /// Marker symbols sit after the filler symbols in symbol-id space.
    int marker_symbol(int class_id) const { return n_symbols + class_id; }
    /// Unit-id pool [lo, hi) owned by a symbol.
    std::pair<int, int> pool(int symbol) const;
    /// Inverse emission map; -1 when the unit belongs to no pool.
    int symbol_of_unit(int unit) const;
};

struct SynthExample {
    UnitSeq units;          // deduplicated sequence
    UnitSeq surface_units;  // with repetitions, before dedup
    std::vector<int> labels;
    std::vector<int> unit_symbols;  // latent symbol per deduplicated unit
    int class_id = -1;
};

/// Canonical task specs used across tests and the experiment harness.
SynthSpec cls8_spec();     // 8-class marker classification
SynthSpec trans12_spec();  // 12-symbol unit-to-label transcription
SynthSpec cont_spec();     // long unlabeled utterances for continuation

std::vector<SynthExample> synth_corpus(const SynthSpec& spec, std::uint64_t seed, int n);

/// Pretraining streams for a unit LM. When the spec has classes, half the
/// streams take the form [x-units, <sep>, front-marker unit] so the backbone
/// learns the separator convention prompts later exploit; the rest (and all
/// streams for class-free specs) are plain utterances.
std::vector<UnitSeq> synth_lm_corpus(const SynthSpec& spec, const Vocabulary& vocab,
                                     std::uint64_t seed, int n);

/// Frame features for a surface unit sequence: every unit id has a fixed
/// seeded center in R^dim and each frame is its unit's center plus Gaussian
/// noise of the given spread. Lets the quantizer path run without audio.
FeatureMatrix features_for_units(const UnitSeq& surface, int n_units, int dim, double spread,
                                 std::uint64_t center_seed);

}  // namespace uprompt
