#pragma once

#include <string>
#include <vector>

#include "uprompt/errors.hpp"

namespace uprompt {

/// A unit sequence: the universal currency between quantizer, LM and tasks.
using UnitSeq = std::vector<int>;

/// Unit vocabulary with the five reserved control ids appended after the
/// quantizer range, so cluster ids [0, n_units) can never collide with them.
struct Vocabulary {
    int size = 0;  // |V| including reserved ids
    int pad = -1;
    int sep = -1;
    int eos = -1;
    int mask = -1;
    int bos = -1;

    static constexpr int reserved_count = 5;

    static Vocabulary with_units(int n_units) {
        if (n_units < 1) {
            throw ConfigError("vocabulary needs at least one unit id");
        }
        Vocabulary v;
        v.size = n_units + reserved_count;
        v.pad = n_units;
        v.sep = n_units + 1;
        v.eos = n_units + 2;
        v.mask = n_units + 3;
        v.bos = n_units + 4;
        return v;
    }

    int n_units() const { return size - reserved_count; }

    bool is_reserved(int id) const { return id >= n_units() && id < size; }

    void check(int id) const {
        if (id < 0 || id >= size) {
            throw VocabError("unit id " + std::to_string(id) + " outside vocabulary of size " +
                             std::to_string(size));
        }
    }

    void check_all(const UnitSeq& units) const {
        for (int u : units) check(u);
    }
};

}  // namespace uprompt
