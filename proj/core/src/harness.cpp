#include "uprompt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "uprompt/checkpoint.hpp"

namespace uprompt {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return "";
    }
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int parse_int(const std::string& value, const std::string& where) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used == value.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError(where + " is not an integer: " + value);
}

double parse_double(const std::string& value, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used == value.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError(where + " is not a number: " + value);
}

std::uint64_t parse_u64(const std::string& value, const std::string& where) {
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(value, &used);
        if (used == value.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError(where + " is not an unsigned integer: " + value);
}

}  // namespace

IniConfig IniConfig::parse_text(const std::string& text) {
    IniConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto cut = line.find_first_of("#;");
        if (cut != std::string::npos) {
            line = line.substr(0, cut);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ConfigError("line " + std::to_string(line_no) +
                                  ": malformed section header: " + line);
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
            }
            cfg.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) +
                              ": expected key = value, got: " + line);
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        }
        if (section.empty()) {
            throw ConfigError("line " + std::to_string(line_no) +
                              ": key outside any [section]: " + key);
        }
        cfg.sections[section][key] = value;
    }
    return cfg;
}

IniConfig IniConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

void IniConfig::set(const std::string& section, const std::string& key,
                    const std::string& value) {
    if (section.empty() || key.empty()) {
        throw ConfigError("config section and key must be nonempty");
    }
    sections[section][key] = value;
}

void IniConfig::apply_override(const std::string& dotted, const std::string& value) {
    const auto dot = dotted.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == dotted.size()) {
        throw ConfigError("override key must look like section.key, got: " + dotted);
    }
    set(dotted.substr(0, dot), dotted.substr(dot + 1), value);
}

bool IniConfig::has(const std::string& section, const std::string& key) const {
    const auto it = sections.find(section);
    return it != sections.end() && it->second.count(key) > 0;
}

const std::string& IniConfig::get(const std::string& section, const std::string& key) const {
    const auto it = sections.find(section);
    if (it != sections.end()) {
        const auto kt = it->second.find(key);
        if (kt != it->second.end()) {
            return kt->second;
        }
    }
    throw ConfigError("missing config key " + section + "." + key);
}

std::string IniConfig::get_or(const std::string& section, const std::string& key,
                              const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

int IniConfig::get_int(const std::string& section, const std::string& key, int fallback) const {
    return has(section, key) ? parse_int(get(section, key), section + "." + key) : fallback;
}

double IniConfig::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
    return has(section, key) ? parse_double(get(section, key), section + "." + key) : fallback;
}

bool IniConfig::get_flag(const std::string& section, const std::string& key,
                         bool fallback) const {
    if (!has(section, key)) {
        return fallback;
    }
    const std::string& v = get(section, key);
    if (v == "1" || v == "true" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "0" || v == "false" || v == "no" || v == "off") {
        return false;
    }
    throw ConfigError(section + "." + key + " is not a boolean: " + v);
}

std::string IniConfig::canonical_text() const {
    std::ostringstream os;
    for (const auto& [section, entries] : sections) {
        os << '[' << section << "]\n";
        for (const auto& [key, value] : entries) {
            os << key << " = " << value << "\n";
        }
    }
    return os.str();
}

std::string IniConfig::fingerprint() const {
    const std::string text = canonical_text();
    const std::uint64_t h =
        fnv1a(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
    std::uint8_t bytes[16];
    for (int i = 0; i < 8; ++i) {
        bytes[i] = static_cast<std::uint8_t>(master >> (8 * i));
        bytes[8 + i] = static_cast<std::uint8_t>(salt >> (8 * i));
    }
    return fnv1a(bytes, sizeof(bytes));
}

std::string cache_dir() {
    const char* dir = std::getenv("UPROMPT_CACHE_DIR");
    return dir == nullptr ? std::string() : std::string(dir);
}

SynthSpec preset_synth(const std::string& preset) {
    if (preset == "cls8") {
        return cls8_spec();
    }
    if (preset == "trans12") {
        return trans12_spec();
    }
    if (preset == "cont") {
        return cont_spec();
    }
    throw ConfigError("unknown task preset: " + preset);
}

TaskSpec preset_task(const std::string& preset, double cond_ratio) {
    const SynthSpec s = preset_synth(preset);
    TaskSpec task;
    task.kind = s.kind;
    task.name = preset;
    if (s.kind == TaskKind::classification) {
        task.n_labels = s.n_classes;
    } else if (s.kind == TaskKind::sequence) {
        task.n_labels = s.n_symbols;
    } else {
        task.cond_ratio = cond_ratio;
    }
    task.validate();
    return task;
}

ExperimentConfig ExperimentConfig::from_ini(const IniConfig& ini) {
    ExperimentConfig cfg;
    const std::string variant = ini.get_or("backbone", "variant", "decoder_only");
    if (variant == "decoder_only") {
        cfg.backbone.variant = LMVariant::decoder_only;
    } else if (variant == "encoder_decoder") {
        cfg.backbone.variant = LMVariant::encoder_decoder;
    } else {
        throw ConfigError("backbone.variant must be decoder_only or encoder_decoder");
    }
    cfg.backbone.n_layers = ini.get_int("backbone", "n_layers", cfg.backbone.n_layers);
    cfg.backbone.n_heads = ini.get_int("backbone", "n_heads", cfg.backbone.n_heads);
    cfg.backbone.d_model = ini.get_int("backbone", "d_model", cfg.backbone.d_model);
    cfg.backbone.d_ffn = ini.get_int("backbone", "d_ffn", cfg.backbone.d_ffn);
    cfg.backbone.n_units = ini.get_int("backbone", "n_units", cfg.backbone.n_units);
    cfg.backbone.max_positions =
        ini.get_int("backbone", "max_positions", cfg.backbone.max_positions);
    cfg.backbone.dropout = ini.get_double("backbone", "dropout", cfg.backbone.dropout);
    cfg.backbone.validate();
    cfg.backbone_ckpt = ini.get_or("backbone", "checkpoint", "");

    cfg.preset = ini.get("task", "preset");
    const double cond_ratio = ini.get_double("task", "cond_ratio", 0.25);
    cfg.synth = preset_synth(cfg.preset);
    cfg.task = preset_task(cfg.preset, cond_ratio);
    cfg.n_train = ini.get_int("task", "n_train", cfg.n_train);
    cfg.n_eval = ini.get_int("task", "n_eval", cfg.n_eval);
    cfg.fewshot_k = ini.get_int("task", "fewshot_k", 0);
    cfg.dataset_path = ini.get_or("task", "dataset", "");
    cfg.eval_dataset_path = ini.get_or("task", "eval_dataset", "");
    if (cfg.n_train < 1 || cfg.n_eval < 1) {
        throw ConfigError("task.n_train and task.n_eval must be >= 1");
    }
    if (cfg.fewshot_k > 0 && cfg.task.kind != TaskKind::classification) {
        throw ConfigError("few-shot subsampling applies to classification tasks only");
    }
    if (cfg.dataset_path.empty() && cfg.synth.n_units_used() > cfg.backbone.n_units) {
        throw ConfigError("preset " + cfg.preset + " needs " +
                          std::to_string(cfg.synth.n_units_used()) +
                          " units but the backbone has " +
                          std::to_string(cfg.backbone.n_units));
    }

    cfg.prompt_len = ini.get_int("prompts", "l", cfg.prompt_len);
    cfg.use_input = ini.get_flag("prompts", "use_input", true);
    cfg.use_deep = ini.get_flag("prompts", "use_deep", true);
    if (cfg.prompt_len < 0) {
        throw ConfigError("prompts.l cannot be negative");
    }

    const std::string default_verb =
        cfg.task.kind == TaskKind::generation ? "none" : "fixed";
    cfg.verbalizer_kind = ini.get_or("verbalizer", "kind", default_verb);
    cfg.tau = ini.get_double("verbalizer", "tau", 0.01);
    if (cfg.task.kind == TaskKind::generation) {
        if (cfg.verbalizer_kind != "none") {
            throw ConfigError("generation tasks take verbalizer.kind = none");
        }
    } else if (cfg.verbalizer_kind != "fixed" && cfg.verbalizer_kind != "learnable") {
        throw ConfigError("verbalizer.kind must be fixed or learnable for label tasks");
    }
    if (cfg.tau <= 0.0) {
        throw ConfigError("verbalizer.tau must be positive");
    }

    if (!ini.has("train", "seed")) {
        throw ConfigError("config must set train.seed");
    }
    cfg.seed = parse_u64(ini.get("train", "seed"), "train.seed");
    cfg.pretrain_epochs = ini.get_int("train", "pretrain_epochs", cfg.pretrain_epochs);
    cfg.corpus_size = ini.get_int("train", "corpus_size", cfg.corpus_size);
    cfg.pretrain_lr = ini.get_double("train", "pretrain_lr", cfg.pretrain_lr);
    cfg.tune.max_steps = ini.get_int("train", "max_steps", 800);
    cfg.tune.adam.lr = ini.get_double("train", "lr", 5e-3);
    cfg.tune.validate_every = ini.get_int("train", "validate_every", 100);
    cfg.tune.patience = ini.get_int("train", "patience", 5);
    cfg.tune.seed = derive_seed(cfg.seed, 6);
    cfg.val_split_every = ini.get_int("train", "val_split_every", 5);
    cfg.out_dir = ini.get_or("train", "out_dir", "");
    if (cfg.pretrain_epochs < 0 || cfg.corpus_size < 1) {
        throw ConfigError("train.pretrain_epochs must be >= 0 and train.corpus_size >= 1");
    }

    const std::string strategy = ini.get_or("decode", "strategy", "beam");
    if (strategy == "beam") {
        cfg.decode.strategy = DecodeStrategy::beam;
    } else if (strategy == "greedy") {
        cfg.decode.strategy = DecodeStrategy::greedy;
    } else {
        throw ConfigError("decode.strategy must be beam or greedy");
    }
    cfg.decode.beam_size = ini.get_int("decode", "beam", 5);
    cfg.decode_max_len = ini.get_int("decode", "max_len", 0);
    cfg.decode.length_alpha = ini.get_double("decode", "alpha", 0.0);
    if (cfg.decode_max_len > 0) {
        cfg.decode.max_len = cfg.decode_max_len;
    }
    cfg.decode.validate();

    cfg.fingerprint = ini.fingerprint();
    return cfg;
}

std::vector<UnitSeq> pretrain_streams(const SynthSpec& spec, const Vocabulary& vocab,
                                      LMVariant variant, std::uint64_t seed, int n) {
    if (n < 1) {
        throw ConfigError("pretraining needs at least one stream");
    }
    if (variant == LMVariant::decoder_only) {
        return synth_lm_corpus(spec, vocab, seed, n);
    }
    std::vector<UnitSeq> streams;
    streams.reserve(static_cast<std::size_t>(n));
    for (auto& ex : synth_corpus(spec, seed, n)) {
        streams.push_back(std::move(ex.units));
    }
    return streams;
}

namespace {

std::string backbone_cache_path(const ExperimentConfig& cfg) {
    const std::string dir = cache_dir();
    if (dir.empty()) {
        return "";
    }
    std::ostringstream key;
    key << cfg.backbone.to_text() << "preset = " << cfg.preset << "\n"
        << "epochs = " << cfg.pretrain_epochs << "\n"
        << "corpus = " << cfg.corpus_size << "\n"
        << "lr = " << cfg.pretrain_lr << "\n"
        << "seed = " << cfg.seed << "\n";
    const std::string text = key.str();
    const std::uint64_t h =
        fnv1a(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
    std::ostringstream name;
    name << dir << "/lm-" << std::hex << std::setw(16) << std::setfill('0') << h << ".spul";
    return name.str();
}

}  // namespace

UnitLM<float> pretrained_backbone(const ExperimentConfig& cfg,
                                  std::vector<double>* epoch_losses) {
    if (!cfg.backbone_ckpt.empty()) {
        UnitLM<float> lm = UnitLM<float>::from_checkpoint(load_checkpoint(cfg.backbone_ckpt));
        if (lm.config().to_text() != cfg.backbone.to_text()) {
            throw CheckpointError("backbone checkpoint config differs from [backbone]");
        }
        return lm;
    }
    const std::string cache_path = backbone_cache_path(cfg);
    if (!cache_path.empty() && fs::exists(cache_path)) {
        try {
            UnitLM<float> lm = UnitLM<float>::from_checkpoint(load_checkpoint(cache_path));
            if (lm.config().to_text() == cfg.backbone.to_text()) {
                return lm;
            }
        } catch (const CheckpointError&) {
            // stale or foreign file: fall through and rebuild
        }
    }
    UnitLM<float> lm(cfg.backbone, derive_seed(cfg.seed, 1));
    std::vector<double> losses;
    if (cfg.pretrain_epochs > 0) {
        const auto streams = pretrain_streams(cfg.synth, lm.vocab(), cfg.backbone.variant,
                                              derive_seed(cfg.seed, 10), cfg.corpus_size);
        PretrainConfig pc;
        pc.epochs = cfg.pretrain_epochs;
        pc.adam.lr = cfg.pretrain_lr;
        pc.seed = derive_seed(cfg.seed, 2);
        if (cfg.backbone.variant == LMVariant::decoder_only) {
            losses = pretrain_next_token(lm, streams, pc);
        } else {
            losses = pretrain_denoise(lm, streams, pc);
        }
    }
    if (epoch_losses != nullptr) {
        *epoch_losses = losses;
    }
    if (!cache_path.empty()) {
        fs::create_directories(fs::path(cache_path).parent_path());
        save_checkpoint(lm.to_checkpoint(), cache_path);
    }
    return lm;
}

TaskData make_task_data(const ExperimentConfig& cfg) {
    const Vocabulary vocab = Vocabulary::with_units(cfg.backbone.n_units);
    Dataset train_full = cfg.dataset_path.empty()
                             ? dataset_from_synth(
                                   synth_corpus(cfg.synth, derive_seed(cfg.seed, 3), cfg.n_train))
                             : load_dataset(cfg.dataset_path);
    Dataset eval = cfg.eval_dataset_path.empty()
                       ? dataset_from_synth(
                             synth_corpus(cfg.synth, derive_seed(cfg.seed, 4), cfg.n_eval))
                       : load_dataset(cfg.eval_dataset_path);
    bind_dataset(train_full, vocab, cfg.task);
    bind_dataset(eval, vocab, cfg.task);
    if (cfg.fewshot_k > 0) {
        train_full = fewshot_subsample(train_full, cfg.fewshot_k, derive_seed(cfg.seed, 9));
    }
    auto [train, val] = split_train_val(train_full, cfg.val_split_every);
    TaskData data;
    data.train = std::move(train);
    data.val = std::move(val);
    data.eval = std::move(eval);
    return data;
}

namespace {

DecodeConfig resolve_decode(const DecodeConfig& base, const TaskSpec& task, const Example& ex,
                            int input_l, const LMConfig& lm_cfg) {
    DecodeConfig cfg = base;
    if (base.max_len <= 0) {
        int want = 4;
        if (task.kind == TaskKind::sequence) {
            want = 2 * static_cast<int>(ex.units.size()) + 4;
        } else if (task.kind == TaskKind::generation) {
            want = static_cast<int>(ex.units.size()) + 8;
        }
        const int occupied = lm_cfg.variant == LMVariant::decoder_only
                                 ? input_l + static_cast<int>(ex.units.size()) + 1
                                 : input_l + 1;
        const int budget = lm_cfg.max_positions - occupied - 1;
        cfg.max_len = std::max(1, std::min(want, budget));
    }
    cfg.validate();
    return cfg;
}

}  // namespace

template <class T>
std::vector<TaskPrediction> in_batch_infer(const UnitLM<T>& lm,
                                           const std::vector<BatchItem<T>>& batch,
                                           const DecodeConfig& cfg) {
    const std::uint64_t hash = lm.param_hash();
    std::vector<TaskPrediction> out;
    out.reserve(batch.size());
    for (const auto& item : batch) {
        if (item.prompts == nullptr || item.task == nullptr || item.input == nullptr) {
            throw UsageError("batch item lacks prompts, task or input");
        }
        if (item.backbone_hash != hash) {
            throw UsageError("batch item prompts were tuned for a different backbone");
        }
        const DecodeConfig resolved =
            resolve_decode(cfg, *item.task, *item.input, item.prompts->input_len(),
                           lm.config());
        out.push_back(predict_example(lm, *item.prompts, item.verb, *item.task, *item.input,
                                      resolved));
    }
    return out;
}

template <class T>
EvalResult evaluate_task(const UnitLM<T>& lm, const PromptSet<T>& prompts,
                         VerbalizerRef<T> verb, const TaskSpec& task, const Dataset& eval,
                         const DecodeConfig& base, int marker_min) {
    task.validate();
    if (eval.empty()) {
        throw DataError("evaluation set is empty");
    }
    EvalResult res;
    res.predictions.reserve(eval.size());
    if (task.kind == TaskKind::classification) {
        std::vector<int> hyp, ref;
        for (const auto& ex : eval.examples) {
            const DecodeConfig cfg =
                resolve_decode(base, task, ex, prompts.input_len(), lm.config());
            TaskPrediction pred = predict_example(lm, prompts, verb, task, ex, cfg);
            hyp.push_back(pred.labels.empty() ? -1 : pred.labels[0]);
            ref.push_back(ex.class_id);
            res.predictions.push_back(std::move(pred));
        }
        res.metrics.emplace_back("accuracy", accuracy(hyp, ref));
    } else if (task.kind == TaskKind::sequence) {
        double cer_total = 0.0, f1_total = 0.0;
        for (const auto& ex : eval.examples) {
            const DecodeConfig cfg =
                resolve_decode(base, task, ex, prompts.input_len(), lm.config());
            TaskPrediction pred = predict_example(lm, prompts, verb, task, ex, cfg);
            cer_total += edit_distance_rate(pred.labels, ex.labels);
            if (marker_min >= 0) {
                f1_total += slot_f1(pred.labels, ex.labels, marker_min);
            }
            res.predictions.push_back(std::move(pred));
        }
        res.metrics.emplace_back("cer", cer_total / static_cast<double>(eval.size()));
        if (marker_min >= 0) {
            res.metrics.emplace_back("slot_f1", f1_total / static_cast<double>(eval.size()));
        }
    } else {
        double lp_total = 0.0, ab_total = 0.0;
        int ab_count = 0;
        std::vector<std::vector<int>> hyps, refs;
        for (const auto& ex : eval.examples) {
            const DecodeConfig cfg =
                resolve_decode(base, task, ex, prompts.input_len(), lm.config());
            auto [seed_units, target] = split_continuation(ex.units, task.cond_ratio);
            UnitScorer<T> scorer(lm, &prompts, seed_units);
            lp_total += forced_logprob(scorer, target, true);
            TaskPrediction pred = predict_example(lm, prompts, verb, task, ex, cfg);
            if (!pred.units.empty()) {
                ab_total += auto_bleu(pred.units, 1);
                ++ab_count;
            }
            hyps.push_back(pred.units);
            refs.push_back(target);
            res.predictions.push_back(std::move(pred));
        }
        res.metrics.emplace_back("target_logprob", lp_total / static_cast<double>(eval.size()));
        res.metrics.emplace_back("bleu", bleu(hyps, refs));
        res.metrics.emplace_back("auto_bleu1", ab_count > 0 ? ab_total / ab_count : 0.0);
    }
    res.metrics.emplace_back("examples", static_cast<double>(eval.size()));
    return res;
}

template <class T>
LinearProbeResult linear_probe_baseline(const UnitLM<T>& lm, const Dataset& train,
                                        const Dataset& eval, const TaskSpec& task,
                                        std::uint64_t seed) {
    if (task.kind != TaskKind::classification) {
        throw UsageError("the linear probe applies to classification tasks");
    }
    if (train.empty() || eval.empty()) {
        throw DataError("linear probe needs nonempty train and eval sets");
    }
    const int d = lm.config().d_model;
    const int n_labels = task.n_labels;
    std::set<int> classes;
    auto features = [&](const Dataset& ds) {
        NoGradGuard guard;
        std::vector<T> data;
        data.reserve(ds.size() * static_cast<std::size_t>(d));
        for (const auto& ex : ds.examples) {
            if (ex.units.empty()) {
                throw DataError("example has no units");
            }
            std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
            for (int u : ex.units) {
                lm.vocab().check(u);
                const T* row = lm.embedding().values().data() +
                               static_cast<std::size_t>(u) * d;
                for (int j = 0; j < d; ++j) {
                    mean[static_cast<std::size_t>(j)] += static_cast<double>(row[j]);
                }
            }
            for (int j = 0; j < d; ++j) {
                data.push_back(static_cast<T>(mean[static_cast<std::size_t>(j)] /
                                              static_cast<double>(ex.units.size())));
            }
        }
        return Tensor<T>::from({static_cast<int>(ds.size()), d}, std::move(data));
    };
    std::vector<int> train_y, eval_y;
    for (const auto& ex : train.examples) {
        if (ex.class_id < 0 || ex.class_id >= n_labels) {
            throw DataError("example class_id outside the label set");
        }
        classes.insert(ex.class_id);
        train_y.push_back(ex.class_id);
    }
    for (const auto& ex : eval.examples) {
        if (ex.class_id < 0 || ex.class_id >= n_labels) {
            throw DataError("example class_id outside the label set");
        }
        eval_y.push_back(ex.class_id);
    }
    Tensor<T> x_train = features(train);
    Tensor<T> x_eval = features(eval);
    Rng rng(seed);
    Tensor<T> w = Tensor<T>::randn({n_labels, d}, rng, static_cast<T>(0.01));
    Tensor<T> b = Tensor<T>::zeros({n_labels});
    w.set_trainable(true);
    b.set_trainable(true);
    AdamConfig ac;
    ac.lr = 0.05;
    Adam<T> opt({w, b}, ac);
    for (int step = 0; step < 300; ++step) {
        Tensor<T> logits = add_rowvec(matmul_nt(x_train, w), b);
        Tensor<T> loss = cross_entropy_rows(logits, train_y);
        opt.zero_grad();
        loss.backward();
        opt.step();
    }
    LinearProbeResult res;
    res.param_count = static_cast<long>(n_labels) * d + n_labels;
    res.degenerate = classes.size() < 2;
    NoGradGuard guard;
    Tensor<T> logits = add_rowvec(matmul_nt(x_eval, w), b);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < eval_y.size(); ++i) {
        const T* row = logits.values().data() + i * static_cast<std::size_t>(n_labels);
        const std::vector<T> row_v(row, row + n_labels);
        if (argmax(row_v) == eval_y[i]) {
            ++hits;
        }
    }
    res.accuracy = static_cast<double>(hits) / static_cast<double>(eval_y.size());
    return res;
}

double MetricsReport::metric(const std::string& name) const {
    for (const auto& [key, value] : metrics) {
        if (key == name) {
            return value;
        }
    }
    throw DataError("report has no metric " + name);
}

void save_report(const MetricsReport& report, const std::string& path) {
    ordered_json j;
    j["schema_version"] = report.schema_version;
    j["task"] = {{"name", report.task_name}, {"kind", report.task_kind}};
    j["seed"] = report.seed;
    j["config_fingerprint"] = report.config_fingerprint;
    j["trainable"] = {{"prompts", report.trainable_prompts},
                      {"verbalizer", report.trainable_verbalizer},
                      {"total", report.trainable_total}};
    j["backbone_params"] = report.backbone_params;
    j["tune"] = {{"steps", report.tune_steps},
                 {"best_step", report.best_step},
                 {"best_val_loss", report.best_val_loss},
                 {"early_stopped", report.early_stopped}};
    j["wall_seconds"] = report.wall_seconds;
    ordered_json metrics = ordered_json::object();
    for (const auto& [key, value] : report.metrics) {
        metrics[key] = value;
    }
    j["metrics"] = metrics;
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open " + path + " for writing");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw DataError("write to " + path + " failed");
    }
}

MetricsReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open report " + path);
    }
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed report " + path + ": " + e.what());
    }
    MetricsReport report;
    try {
        report.schema_version = j.at("schema_version").get<int>();
        if (report.schema_version != 1) {
            throw DataError("unsupported report schema_version");
        }
        report.task_name = j.at("task").at("name").get<std::string>();
        report.task_kind = j.at("task").at("kind").get<std::string>();
        report.seed = j.at("seed").get<std::uint64_t>();
        report.config_fingerprint = j.at("config_fingerprint").get<std::string>();
        report.trainable_prompts = j.at("trainable").at("prompts").get<long>();
        report.trainable_verbalizer = j.at("trainable").at("verbalizer").get<long>();
        report.trainable_total = j.at("trainable").at("total").get<long>();
        report.backbone_params = j.at("backbone_params").get<long>();
        report.tune_steps = j.at("tune").at("steps").get<int>();
        report.best_step = j.at("tune").at("best_step").get<int>();
        report.best_val_loss = j.at("tune").at("best_val_loss").get<double>();
        report.early_stopped = j.at("tune").at("early_stopped").get<bool>();
        report.wall_seconds = j.at("wall_seconds").get<double>();
        for (const auto& [key, value] : j.at("metrics").items()) {
            report.metrics.emplace_back(key, value.get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("report " + path + " lacks required fields: " + e.what());
    }
    return report;
}

std::string report_csv(const MetricsReport& report) {
    std::ostringstream os;
    os << "key,value\n";
    os << "task," << report.task_name << "\n";
    os << "kind," << report.task_kind << "\n";
    os << "seed," << report.seed << "\n";
    os << "config_fingerprint," << report.config_fingerprint << "\n";
    os << "trainable_prompts," << report.trainable_prompts << "\n";
    os << "trainable_verbalizer," << report.trainable_verbalizer << "\n";
    os << "trainable_total," << report.trainable_total << "\n";
    os << "backbone_params," << report.backbone_params << "\n";
    os << "tune_steps," << report.tune_steps << "\n";
    os << "best_step," << report.best_step << "\n";
    os << "best_val_loss," << report.best_val_loss << "\n";
    os << "wall_seconds," << report.wall_seconds << "\n";
    for (const auto& [key, value] : report.metrics) {
        os << key << ',' << value << "\n";
    }
    return os.str();
}

namespace {

std::string kind_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::classification:
            return "classification";
        case TaskKind::sequence:
            return "sequence";
        case TaskKind::generation:
            return "generation";
    }
    return "unknown";
}

}  // namespace

MetricsReport run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.backbone.validate();
    cfg.task.validate();

    std::vector<double> pretrain_losses;
    UnitLM<float> lm = pretrained_backbone(cfg, &pretrain_losses);
    lm.freeze();

    TaskData data = make_task_data(cfg);

    PromptSet<float> prompts = init_prompts<float>(cfg.backbone, cfg.prompt_len,
                                                   derive_seed(cfg.seed, 5));
    prompts.use_input = cfg.use_input;
    prompts.use_deep = cfg.use_deep;

    FixedVerbalizer fixed;
    LearnableVerbalizer<float> learnable;
    VerbalizerRef<float> verb;
    if (cfg.verbalizer_kind == "fixed") {
        fixed = fixed_from_seed(cfg.task.n_labels, lm.vocab(), derive_seed(cfg.seed, 7));
        verb.fixed = &fixed;
    } else if (cfg.verbalizer_kind == "learnable") {
        learnable = make_learnable_verbalizer<float>(cfg.task.n_labels, lm.vocab(), cfg.tau);
        verb.learnable = &learnable;
    }

    TuneResult tuned = prompt_tune(lm, prompts, verb, cfg.task, data.train, data.val, cfg.tune);

    DecodeConfig decode = cfg.decode;
    decode.max_len = cfg.decode_max_len;  // 0 = per-example auto
    EvalResult eval = evaluate_task(lm, prompts, verb, cfg.task, data.eval, decode);

    MetricsReport report;
    report.task_name = cfg.task.name;
    report.task_kind = kind_name(cfg.task.kind);
    report.seed = cfg.seed;
    report.config_fingerprint = cfg.fingerprint;
    const TrainableCount counts = count_trainable(prompts, verb.learnable);
    report.trainable_prompts = counts.prompts;
    report.trainable_verbalizer = counts.verbalizer;
    report.trainable_total = counts.total;
    report.backbone_params = static_cast<long>(lm.param_count());
    report.tune_steps = tuned.steps_run;
    report.best_step = tuned.best_step;
    report.best_val_loss = tuned.best_val_loss;
    report.early_stopped = tuned.early_stopped;
    report.metrics = eval.metrics;
    if (!pretrain_losses.empty()) {
        report.metrics.emplace_back("pretrain_loss", pretrain_losses.back());
    }
    const auto t1 = std::chrono::steady_clock::now();
    report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        const fs::path out(cfg.out_dir);
        save_checkpoint(lm.to_checkpoint(), (out / "backbone.spul").string());
        save_checkpoint(prompts_to_checkpoint(prompts, lm.param_hash()),
                        (out / "prompts.spul").string());
        if (verb.learnable != nullptr) {
            save_checkpoint(verbalizer_to_checkpoint(learnable),
                            (out / "verbalizer.spul").string());
            const auto annotations = annotate_units(data.train, cfg.backbone.n_units);
            write_weights_csv(export_weights(learnable, annotations, 5),
                              (out / "verbalizer_weights.csv").string());
        }
        if (verb.fixed != nullptr) {
            ordered_json j;
            j["schema_version"] = 1;
            j["label_to_unit"] = fixed.label_to_unit;
            std::ofstream vf(out / "fixed_verbalizer.json");
            vf << j.dump(2) << '\n';
        }
        save_report(report, (out / "report.json").string());
    }
    return report;
}

MetricsReport run_experiment(const IniConfig& ini) {
    return run_experiment(ExperimentConfig::from_ini(ini));
}

#define UPROMPT_INSTANTIATE_HARNESS(T)                                                       \
    template std::vector<TaskPrediction> in_batch_infer<T>(                                  \
        const UnitLM<T>&, const std::vector<BatchItem<T>>&, const DecodeConfig&);            \
    template EvalResult evaluate_task<T>(const UnitLM<T>&, const PromptSet<T>&,              \
                                         VerbalizerRef<T>, const TaskSpec&, const Dataset&,  \
                                         const DecodeConfig&, int);                          \
    template LinearProbeResult linear_probe_baseline<T>(const UnitLM<T>&, const Dataset&,    \
                                                        const Dataset&, const TaskSpec&,     \
                                                        std::uint64_t);

UPROMPT_INSTANTIATE_HARNESS(float)
UPROMPT_INSTANTIATE_HARNESS(double)

#undef UPROMPT_INSTANTIATE_HARNESS

}  // namespace uprompt
