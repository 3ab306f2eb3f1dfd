#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uprompt/synth.hpp"
#include "uprompt/verbalizer.hpp"
#include "uprompt/vocab.hpp"

namespace uprompt {

struct Example {
    UnitSeq units;
    std::vector<int> labels;
    std::vector<int> unit_symbols;  // latent-symbol metadata; may be empty
    int class_id = -1;
};

struct TaskSpec {
    TaskKind kind = TaskKind::classification;
    std::string name;
    int n_labels = 0;
    /// Continuation seed fraction; meaningful only for generation tasks.
    double cond_ratio = 0.0;

    void validate() const;
};

struct Dataset {
    std::vector<Example> examples;

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }
};

Dataset dataset_from_synth(const std::vector<SynthExample>& synth);

/// JSON-lines files: an optional header object {"schema_version": 1} followed
/// by one example per line with fields units (int array), labels (string
/// array) and meta (object). Malformed lines raise DataError with the line
/// number.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path);

/// Checks every unit id against the vocabulary and every label against the
/// task's label set; throws DataError naming the offending example.
void bind_dataset(const Dataset& ds, const Vocabulary& vocab, const TaskSpec& task);

/// Exactly k examples per class, uniformly without replacement; classes are
/// taken from class_id. Throws DataError naming any class with fewer than k.
Dataset fewshot_subsample(const Dataset& ds, int k, std::uint64_t seed);

/// (seed segment, target continuation): seed is the first ceil(r * len)
/// units; both parts must end up nonempty.
std::pair<UnitSeq, UnitSeq> split_continuation(const UnitSeq& units, double r);

/// Deterministic train/validation split by position (every val_every-th
/// example goes to validation).
std::pair<Dataset, Dataset> split_train_val(const Dataset& ds, int val_every = 5);

/// Occurrence-weighted dominant symbol per unit id, from example metadata.
std::vector<UnitAnnotation> annotate_units(const Dataset& ds, int n_units);

}  // namespace uprompt
