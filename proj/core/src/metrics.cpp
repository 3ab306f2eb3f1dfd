#include "uprompt/metrics.hpp"

#include <cmath>
#include <map>
#include <string>

namespace uprompt {

double edit_distance_rate(const std::vector<int>& hyp, const std::vector<int>& ref) {
    if (ref.empty()) {
        throw DataError("edit distance rate needs a nonempty reference");
    }
    return static_cast<double>(levenshtein(hyp, ref)) / static_cast<double>(ref.size());
}

double accuracy(const std::vector<int>& hyp, const std::vector<int>& ref) {
    if (ref.empty()) {
        throw DataError("accuracy needs a nonempty reference");
    }
    if (hyp.size() != ref.size()) {
        throw DataError("accuracy needs aligned sequences, got " + std::to_string(hyp.size()) +
                        " vs " + std::to_string(ref.size()));
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        if (hyp[i] == ref[i]) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(ref.size());
}

namespace {

using Slot = std::pair<int, std::vector<int>>;

std::map<Slot, int> extract_slots(const std::vector<int>& seq, int marker_min) {
    std::map<Slot, int> slots;
    std::size_t i = 0;
    while (i < seq.size()) {
        if (seq[i] < marker_min) {
            ++i;
            continue;
        }
        Slot slot{seq[i], {}};
        ++i;
        while (i < seq.size() && seq[i] < marker_min) {
            slot.second.push_back(seq[i]);
            ++i;
        }
        ++slots[std::move(slot)];
    }
    return slots;
}

}  // namespace

double slot_f1(const std::vector<int>& hyp, const std::vector<int>& ref, int marker_min) {
    const auto hyp_slots = extract_slots(hyp, marker_min);
    const auto ref_slots = extract_slots(ref, marker_min);
    int n_hyp = 0, n_ref = 0, matched = 0;
    for (const auto& [slot, count] : hyp_slots) {
        n_hyp += count;
        auto it = ref_slots.find(slot);
        if (it != ref_slots.end()) {
            matched += std::min(count, it->second);
        }
    }
    for (const auto& [slot, count] : ref_slots) {
        n_ref += count;
    }
    if (n_hyp == 0 && n_ref == 0) {
        return 1.0;
    }
    if (matched == 0) {
        return 0.0;
    }
    const double precision = static_cast<double>(matched) / n_hyp;
    const double recall = static_cast<double>(matched) / n_ref;
    return 2.0 * precision * recall / (precision + recall);
}

namespace {

std::map<std::vector<int>, int> ngram_counts(const std::vector<int>& seq, int n) {
    std::map<std::vector<int>, int> counts;
    if (static_cast<int>(seq.size()) < n) {
        return counts;
    }
    for (std::size_t i = 0; i + n <= seq.size(); ++i) {
        ++counts[std::vector<int>(seq.begin() + i, seq.begin() + i + n)];
    }
    return counts;
}

}  // namespace

double bleu(const std::vector<std::vector<int>>& hyp,
            const std::vector<std::vector<int>>& ref) {
    if (hyp.size() != ref.size()) {
        throw DataError("BLEU needs aligned corpora, got " + std::to_string(hyp.size()) +
                        " vs " + std::to_string(ref.size()));
    }
    if (hyp.empty()) {
        throw DataError("BLEU needs a nonempty corpus");
    }
    constexpr int max_order = 4;
    long matched[max_order] = {0, 0, 0, 0};
    long total[max_order] = {0, 0, 0, 0};
    long hyp_len = 0, ref_len = 0;
    for (std::size_t s = 0; s < hyp.size(); ++s) {
        hyp_len += static_cast<long>(hyp[s].size());
        ref_len += static_cast<long>(ref[s].size());
        for (int n = 1; n <= max_order; ++n) {
            const auto hc = ngram_counts(hyp[s], n);
            const auto rc = ngram_counts(ref[s], n);
            for (const auto& [gram, count] : hc) {
                total[n - 1] += count;
                auto it = rc.find(gram);
                if (it != rc.end()) {
                    matched[n - 1] += std::min(count, it->second);
                }
            }
        }
    }
    if (hyp_len == 0 || matched[0] == 0) {
        return 0.0;
    }
    double log_prec = std::log(static_cast<double>(matched[0]) / total[0]);
    for (int n = 2; n <= max_order; ++n) {
        log_prec += std::log(static_cast<double>(matched[n - 1] + 1) / (total[n - 1] + 1));
    }
    log_prec /= max_order;
    const double bp =
        hyp_len >= ref_len ? 1.0
                           : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
    return 100.0 * bp * std::exp(log_prec);
}

double auto_bleu(const std::vector<int>& tokens, int n) {
    if (n < 1) {
        throw ConfigError("auto_bleu needs n >= 1");
    }
    if (static_cast<int>(tokens.size()) < n) {
        throw DataError("utterance of " + std::to_string(tokens.size()) +
                        " tokens is shorter than n = " + std::to_string(n));
    }
    const auto counts = ngram_counts(tokens, n);
    long repeated = 0, total = 0;
    for (const auto& [gram, count] : counts) {
        total += count;
        if (count > 1) {
            repeated += count;
        }
    }
    return static_cast<double>(repeated) / static_cast<double>(total);
}

}  // namespace uprompt
