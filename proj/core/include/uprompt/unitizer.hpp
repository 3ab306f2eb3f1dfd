#pragma once

#include <cstdint>
#include <vector>

#include "uprompt/errors.hpp"
#include "uprompt/vocab.hpp"

namespace uprompt {

/// Frame-level feature matrix, the desk-scale stand-in for SSL speech
/// representations. frames may be 0 (empty utterance).
struct FeatureMatrix {
    int frames = 0;
    int dim = 0;
    std::vector<float> values;  // row-major frames x dim

    float at(int t, int f) const { return values[static_cast<std::size_t>(t) * dim + f]; }
    void validate() const;
};

/// K-means codebook mapping feature frames to discrete units.
struct QuantizerModel {
    int k = 0;
    int dim = 0;
    std::uint64_t seed = 0;
    std::vector<double> centroids;  // k x dim
    /// Sum of squared distances after each Lloyd iteration (index 0 is the
    /// post-seeding assignment); non-increasing by construction.
    std::vector<double> inertia_history;
    int iters_run = 0;

    double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
};

/// Lloyd's algorithm with k-means++ seeding over the pooled frames of all
/// matrices. Stops when assignments stabilize or after max_iters refinement
/// passes. Throws DataError when total frames < k.
QuantizerModel kmeans_fit(const std::vector<FeatureMatrix>& data, int k, int max_iters,
                          std::uint64_t seed);

/// Nearest centroid per frame (squared Euclidean, ties to the lowest cluster
/// index). Empty input gives an empty sequence.
UnitSeq quantize(const QuantizerModel& model, const FeatureMatrix& features);

/// Collapses each maximal run of equal ids to a single id.
UnitSeq deduplicate(const UnitSeq& units);

enum class AudioFormat { waveform, ssl, units };

struct DataSize {
    double bits = 0.0;
    double ratio_to_waveform = 0.0;
};

/// Storage cost of T seconds of audio in each representation:
/// waveform 16 bit x 16 kHz, SSL float32 x ssl_dim x 50 fps, discrete units
/// ceil(log2 clusters) bits x 50 fps. ssl_dim defaults to 1024 and is
/// overridable since published feature widths vary by encoder.
DataSize data_size_bits(AudioFormat format, double seconds, int clusters = 0, int ssl_dim = 1024);

}  // namespace uprompt
