#include "uprompt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "uprompt/rng.hpp"

namespace uprompt {

using nlohmann::json;

void TaskSpec::validate() const {
    if (name.empty()) {
        throw ConfigError("task needs a name");
    }
    switch (kind) {
        case TaskKind::classification:
        case TaskKind::sequence:
            if (n_labels < 2) {
                throw ConfigError("task " + name + " needs n_labels >= 2");
            }
            break;
        case TaskKind::generation:
            if (cond_ratio <= 0.0 || cond_ratio >= 1.0) {
                throw ConfigError("task " + name + " needs cond_ratio in (0,1)");
            }
            break;
        default:
            throw ConfigError("task " + name + " has an unknown kind");
    }
}

Dataset dataset_from_synth(const std::vector<SynthExample>& synth) {
    Dataset ds;
    ds.examples.reserve(synth.size());
    for (const auto& ex : synth) {
        Example out;
        out.units = ex.units;
        out.labels = ex.labels;
        out.unit_symbols = ex.unit_symbols;
        out.class_id = ex.class_id;
        ds.examples.push_back(std::move(out));
    }
    return ds;
}

namespace {

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
    throw DataError("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open dataset " + path);
    }
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    bool saw_any = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            line_error(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) {
            line_error(line_no, "expected a JSON object");
        }
        if (!saw_any && obj.contains("schema_version")) {
            if (!obj["schema_version"].is_number_integer() ||
                obj["schema_version"].get<int>() != 1) {
                line_error(line_no, "unsupported schema_version");
            }
            saw_any = true;
            continue;
        }
        saw_any = true;
        Example ex;
        if (!obj.contains("units") || !obj["units"].is_array()) {
            line_error(line_no, "missing units array");
        }
        for (const auto& u : obj["units"]) {
            if (!u.is_number_integer()) {
                line_error(line_no, "units must be integers");
            }
            ex.units.push_back(u.get<int>());
        }
        if (obj.contains("labels")) {
            if (!obj["labels"].is_array()) {
                line_error(line_no, "labels must be an array of strings");
            }
            for (const auto& lab : obj["labels"]) {
                if (!lab.is_string()) {
                    line_error(line_no, "labels must be an array of strings");
                }
                const std::string s = lab.get<std::string>();
                std::size_t used = 0;
                int value = 0;
                try {
                    value = std::stoi(s, &used);
                } catch (const std::exception&) {
                    line_error(line_no, "label '" + s + "' is not an integer");
                }
                if (used != s.size()) {
                    line_error(line_no, "label '" + s + "' is not an integer");
                }
                ex.labels.push_back(value);
            }
        }
        if (obj.contains("meta")) {
            const auto& meta = obj["meta"];
            if (!meta.is_object()) {
                line_error(line_no, "meta must be an object");
            }
            if (meta.contains("class_id")) {
                if (!meta["class_id"].is_number_integer()) {
                    line_error(line_no, "meta.class_id must be an integer");
                }
                ex.class_id = meta["class_id"].get<int>();
            }
            if (meta.contains("unit_symbols")) {
                if (!meta["unit_symbols"].is_array()) {
                    line_error(line_no, "meta.unit_symbols must be an int array");
                }
                for (const auto& s : meta["unit_symbols"]) {
                    if (!s.is_number_integer()) {
                        line_error(line_no, "meta.unit_symbols must be an int array");
                    }
                    ex.unit_symbols.push_back(s.get<int>());
                }
            }
        }
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open " + path + " for writing");
    }
    out << json{{"schema_version", 1}}.dump() << '\n';
    for (const auto& ex : ds.examples) {
        json obj;
        obj["units"] = ex.units;
        json labels = json::array();
        for (int lab : ex.labels) {
            labels.push_back(std::to_string(lab));
        }
        obj["labels"] = labels;
        json meta = json::object();
        if (ex.class_id >= 0) {
            meta["class_id"] = ex.class_id;
        }
        if (!ex.unit_symbols.empty()) {
            meta["unit_symbols"] = ex.unit_symbols;
        }
        obj["meta"] = meta;
        out << obj.dump() << '\n';
    }
    if (!out) {
        throw DataError("write to " + path + " failed");
    }
}

void bind_dataset(const Dataset& ds, const Vocabulary& vocab, const TaskSpec& task) {
    task.validate();
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        const Example& ex = ds.examples[i];
        const std::string where = "example " + std::to_string(i);
        if (ex.units.empty()) {
            throw DataError(where + " has no units");
        }
        for (int u : ex.units) {
            if (u < 0 || u >= vocab.size) {
                throw DataError(where + " holds unit " + std::to_string(u) +
                                " outside vocabulary of size " + std::to_string(vocab.size));
            }
        }
        switch (task.kind) {
            case TaskKind::classification:
                if (ex.class_id < 0 || ex.class_id >= task.n_labels) {
                    throw DataError(where + " class_id " + std::to_string(ex.class_id) +
                                    " outside " + std::to_string(task.n_labels) + " labels");
                }
                break;
            case TaskKind::sequence:
                if (ex.labels.size() != ex.units.size()) {
                    throw DataError(where + " label count " +
                                    std::to_string(ex.labels.size()) +
                                    " does not match unit count " +
                                    std::to_string(ex.units.size()));
                }
                for (int lab : ex.labels) {
                    if (lab < 0 || lab >= task.n_labels) {
                        throw DataError(where + " label " + std::to_string(lab) + " outside " +
                                        std::to_string(task.n_labels) + " labels");
                    }
                }
                break;
            case TaskKind::generation:
                break;
        }
    }
}

Dataset fewshot_subsample(const Dataset& ds, int k, std::uint64_t seed) {
    if (k < 1) {
        throw ConfigError("few-shot subsampling needs k >= 1");
    }
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        const int c = ds.examples[i].class_id;
        if (c < 0) {
            throw DataError("example " + std::to_string(i) + " has no class_id");
        }
        by_class[c].push_back(i);
    }
    if (by_class.empty()) {
        throw DataError("dataset is empty");
    }
    Rng rng(seed);
    std::vector<std::size_t> chosen;
    for (auto& [cls, indices] : by_class) {
        if (static_cast<int>(indices.size()) < k) {
            throw DataError("class " + std::to_string(cls) + " has only " +
                            std::to_string(indices.size()) + " examples, need " +
                            std::to_string(k));
        }
        rng.shuffle(indices);
        chosen.insert(chosen.end(), indices.begin(), indices.begin() + k);
    }
    std::sort(chosen.begin(), chosen.end());
    Dataset out;
    out.examples.reserve(chosen.size());
    for (std::size_t i : chosen) {
        out.examples.push_back(ds.examples[i]);
    }
    return out;
}

std::pair<UnitSeq, UnitSeq> split_continuation(const UnitSeq& units, double r) {
    if (r <= 0.0 || r >= 1.0) {
        throw ConfigError("continuation ratio must lie in (0,1)");
    }
    const int len = static_cast<int>(units.size());
    if (len < 2) {
        throw DataError("sequence of " + std::to_string(len) +
                        " units cannot be split for continuation");
    }
    int n_seed = static_cast<int>(std::ceil(r * len));
    if (n_seed < 1) {
        n_seed = 1;
    }
    if (n_seed >= len) {
        throw DataError("continuation ratio leaves no target units");
    }
    UnitSeq seed(units.begin(), units.begin() + n_seed);
    UnitSeq target(units.begin() + n_seed, units.end());
    return {std::move(seed), std::move(target)};
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& ds, int val_every) {
    if (val_every < 2) {
        throw ConfigError("train/val split needs val_every >= 2");
    }
    Dataset train, val;
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        if (i % static_cast<std::size_t>(val_every) ==
            static_cast<std::size_t>(val_every - 1)) {
            val.examples.push_back(ds.examples[i]);
        } else {
            train.examples.push_back(ds.examples[i]);
        }
    }
    return {std::move(train), std::move(val)};
}

std::vector<UnitAnnotation> annotate_units(const Dataset& ds, int n_units) {
    if (n_units < 1) {
        throw ConfigError("annotate_units needs n_units >= 1");
    }
    std::vector<std::map<int, int>> counts(static_cast<std::size_t>(n_units));
    for (const auto& ex : ds.examples) {
        if (ex.unit_symbols.size() != ex.units.size()) {
            continue;  // no aligned metadata for this example
        }
        for (std::size_t i = 0; i < ex.units.size(); ++i) {
            const int u = ex.units[i];
            if (u >= 0 && u < n_units) {
                ++counts[static_cast<std::size_t>(u)][ex.unit_symbols[i]];
            }
        }
    }
    std::vector<UnitAnnotation> out(static_cast<std::size_t>(n_units));
    for (int u = 0; u < n_units; ++u) {
        int total = 0, best_symbol = -1, best_count = 0;
        for (const auto& [symbol, count] : counts[static_cast<std::size_t>(u)]) {
            total += count;
            if (count > best_count) {  // map order makes ties pick the lowest symbol
                best_count = count;
                best_symbol = symbol;
            }
        }
        auto& ann = out[static_cast<std::size_t>(u)];
        ann.occurrences = total;
        ann.symbol = best_symbol;
        ann.purity = total > 0 ? static_cast<double>(best_count) / total : 0.0;
    }
    return out;
}

}  // namespace uprompt
