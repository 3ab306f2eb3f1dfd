#include "uprompt/unitizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uprompt/rng.hpp"

namespace uprompt {

void FeatureMatrix::validate() const {
    if (frames < 0 || dim < 1) {
        throw DataError("feature matrix needs frames >= 0 and dim >= 1");
    }
    if (values.size() != static_cast<std::size_t>(frames) * dim) {
        throw DataError("feature matrix value count does not match frames x dim");
    }
    for (float v : values) {
        if (!std::isfinite(v)) {
            throw DataError("feature matrix contains a non-finite value");
        }
    }
}

namespace {

double sq_dist(const double* a, const float* b, int dim) {
    double d = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double diff = a[i] - static_cast<double>(b[i]);
        d += diff * diff;
    }
    return d;
}

// Nearest centroid; ties resolve to the lowest index because of the strict
// less-than comparison.
int nearest(const std::vector<double>& centroids, int k, int dim, const float* frame) {
    int best = 0;
    double best_d = sq_dist(centroids.data(), frame, dim);
    for (int c = 1; c < k; ++c) {
        const double d = sq_dist(centroids.data() + static_cast<std::size_t>(c) * dim, frame, dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace

QuantizerModel kmeans_fit(const std::vector<FeatureMatrix>& data, int k, int max_iters,
                          std::uint64_t seed) {
    if (k < 1) {
        throw ConfigError("kmeans_fit needs k >= 1");
    }
    if (max_iters < 0) {
        throw ConfigError("kmeans_fit needs max_iters >= 0");
    }
    int dim = 0;
    std::size_t total = 0;
    for (const auto& m : data) {
        m.validate();
        if (m.frames == 0) continue;
        if (dim == 0) {
            dim = m.dim;
        } else if (m.dim != dim) {
            throw DataError("feature matrices disagree on dimension");
        }
        total += static_cast<std::size_t>(m.frames);
    }
    if (total < static_cast<std::size_t>(k)) {
        throw DataError("kmeans_fit: " + std::to_string(total) + " frames for k=" +
                        std::to_string(k));
    }

    // pool every frame into one flat table
    std::vector<float> frames(total * static_cast<std::size_t>(dim));
    std::size_t off = 0;
    for (const auto& m : data) {
        std::copy(m.values.begin(), m.values.end(), frames.begin() + off);
        off += m.values.size();
    }
    const auto frame_at = [&](std::size_t i) {
        return frames.data() + i * static_cast<std::size_t>(dim);
    };

    QuantizerModel model;
    model.k = k;
    model.dim = dim;
    model.seed = seed;
    model.centroids.assign(static_cast<std::size_t>(k) * dim, 0.0);

    Rng rng(seed);

    // k-means++ seeding: first centroid uniform, the rest proportional to the
    // squared distance from the nearest already-chosen centroid.
    std::vector<double> min_d(total, 0.0);
    {
        const std::size_t first = rng.below(total);
        for (int f = 0; f < dim; ++f) {
            model.centroids[static_cast<std::size_t>(f)] =
                static_cast<double>(frame_at(first)[f]);
        }
        for (std::size_t i = 0; i < total; ++i) {
            min_d[i] = sq_dist(model.centroids.data(), frame_at(i), dim);
        }
        for (int c = 1; c < k; ++c) {
            double mass = 0.0;
            for (double d : min_d) mass += d;
            std::size_t pick = 0;
            if (mass <= 0.0) {
                pick = rng.below(total);  // all points identical: any choice works
            } else {
                double target = rng.uniform() * mass;
                for (; pick + 1 < total; ++pick) {
                    target -= min_d[pick];
                    if (target <= 0.0) break;
                }
            }
            double* cent = model.centroids.data() + static_cast<std::size_t>(c) * dim;
            for (int f = 0; f < dim; ++f) cent[f] = static_cast<double>(frame_at(pick)[f]);
            for (std::size_t i = 0; i < total; ++i) {
                min_d[i] = std::min(min_d[i], sq_dist(cent, frame_at(i), dim));
            }
        }
    }

    std::vector<int> assign(total, -1);
    const auto assignment_pass = [&]() {
        double inertia = 0.0;
        bool changed = false;
        for (std::size_t i = 0; i < total; ++i) {
            const int c = nearest(model.centroids, k, dim, frame_at(i));
            if (c != assign[i]) {
                changed = true;
                assign[i] = c;
            }
            inertia += sq_dist(model.centroids.data() + static_cast<std::size_t>(c) * dim,
                               frame_at(i), dim);
        }
        model.inertia_history.push_back(inertia);
        return changed;
    };

    assignment_pass();
    for (int it = 0; it < max_iters; ++it) {
        // update: centroid = mean of its members; an empty cluster steals the
        // point currently worst-served by its own centroid
        std::vector<double> sums(static_cast<std::size_t>(k) * dim, 0.0);
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < total; ++i) {
            const float* fr = frame_at(i);
            double* s = sums.data() + static_cast<std::size_t>(assign[i]) * dim;
            for (int f = 0; f < dim; ++f) s[f] += static_cast<double>(fr[f]);
            ++counts[static_cast<std::size_t>(assign[i])];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) {
                std::size_t worst = 0;
                double worst_d = -1.0;
                for (std::size_t i = 0; i < total; ++i) {
                    const double d = sq_dist(
                        model.centroids.data() + static_cast<std::size_t>(assign[i]) * dim,
                        frame_at(i), dim);
                    if (d > worst_d) {
                        worst_d = d;
                        worst = i;
                    }
                }
                double* cent = model.centroids.data() + static_cast<std::size_t>(c) * dim;
                for (int f = 0; f < dim; ++f) cent[f] = static_cast<double>(frame_at(worst)[f]);
                assign[worst] = c;
                continue;
            }
            double* cent = model.centroids.data() + static_cast<std::size_t>(c) * dim;
            const double inv = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            for (int f = 0; f < dim; ++f) {
                cent[f] = sums[static_cast<std::size_t>(c) * dim + f] * inv;
            }
        }
        model.iters_run = it + 1;
        const bool changed = assignment_pass();
        const std::size_t h = model.inertia_history.size();
        if (model.inertia_history[h - 1] > model.inertia_history[h - 2] + 1e-9) {
            throw NumericError("kmeans inertia increased between iterations");
        }
        if (!changed) break;
    }
    return model;
}

UnitSeq quantize(const QuantizerModel& model, const FeatureMatrix& features) {
    features.validate();
    if (model.k < 1 || model.centroids.size() != static_cast<std::size_t>(model.k) * model.dim) {
        throw DataError("quantizer model is malformed");
    }
    if (features.frames > 0 && features.dim != model.dim) {
        throw ShapeError("feature dim " + std::to_string(features.dim) +
                         " does not match quantizer dim " + std::to_string(model.dim));
    }
    UnitSeq units;
    units.reserve(static_cast<std::size_t>(features.frames));
    for (int t = 0; t < features.frames; ++t) {
        units.push_back(nearest(model.centroids, model.k, model.dim,
                                features.values.data() +
                                    static_cast<std::size_t>(t) * features.dim));
    }
    return units;
}

UnitSeq deduplicate(const UnitSeq& units) {
    UnitSeq out;
    out.reserve(units.size());
    for (int u : units) {
        if (out.empty() || out.back() != u) {
            out.push_back(u);
        }
    }
    return out;
}

DataSize data_size_bits(AudioFormat format, double seconds, int clusters, int ssl_dim) {
    if (seconds < 0.0) {
        throw ConfigError("data_size_bits needs a non-negative duration");
    }
    constexpr double sample_rate = 16000.0;
    constexpr double waveform_bits = 16.0;
    constexpr double frame_rate = 50.0;
    const double waveform_rate = waveform_bits * sample_rate;
    double rate = 0.0;
    switch (format) {
        case AudioFormat::waveform:
            rate = waveform_rate;
            break;
        case AudioFormat::ssl:
            if (ssl_dim < 1) {
                throw ConfigError("data_size_bits needs ssl_dim >= 1");
            }
            rate = 32.0 * static_cast<double>(ssl_dim) * frame_rate;
            break;
        case AudioFormat::units: {
            if (clusters < 2) {
                throw ConfigError("data_size_bits needs a cluster count >= 2 for units");
            }
            int bits_per_unit = 0;  // exact ceil(log2 clusters)
            while ((1LL << bits_per_unit) < clusters) ++bits_per_unit;
            rate = static_cast<double>(bits_per_unit) * frame_rate;
            break;
        }
    }
    DataSize out;
    out.bits = rate * seconds;
    out.ratio_to_waveform = rate / waveform_rate;
    return out;
}

}  // namespace uprompt
