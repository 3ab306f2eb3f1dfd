#pragma once

#include <algorithm>
#include <vector>

#include "uprompt/errors.hpp"

namespace uprompt {

/// Edit distance (insert/delete/substitute, unit costs) between two token
/// sequences. Works over any equality-comparable token type.
template <class Tok>
int levenshtein(const std::vector<Tok>& a, const std::vector<Tok>& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) {
        prev[j] = static_cast<int>(j);
    }
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

/// Levenshtein(hyp, ref) / len(ref). The token granularity of the inputs
/// decides whether this reads as WER, CER or PER.
double edit_distance_rate(const std::vector<int>& hyp, const std::vector<int>& ref);

/// Position-aligned exact-match fraction.
double accuracy(const std::vector<int>& hyp, const std::vector<int>& ref);

/// Micro-F1 over (slot-type, slot-value) pairs. Sequences interleave
/// transcript labels with slot-type markers; every label >= marker_min opens
/// a slot whose value is the run of transcript labels up to the next marker.
/// Both sides empty of slots scores 1.
double slot_f1(const std::vector<int>& hyp, const std::vector<int>& ref, int marker_min);

/// Corpus-level BLEU in [0, 100]: n-grams up to 4, brevity penalty, clipped
/// counts, add-one smoothing on orders >= 2 (unigram precision stays exact,
/// so zero unigram overlap scores 0 while bleu(x, x) = 100).
double bleu(const std::vector<std::vector<int>>& hyp, const std::vector<std::vector<int>>& ref);

/// Within-utterance repetition: the fraction of n-gram positions whose
/// n-gram occurs more than once in the utterance. 0 = all distinct.
double auto_bleu(const std::vector<int>& tokens, int n);

}  // namespace uprompt
