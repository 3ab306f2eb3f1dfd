// uprompt: prompt tuning against frozen discrete-unit language models.
// Subcommands cover the whole pipeline: quantize features into units,
// synthesize corpora, pretrain backbones, tune prompts, evaluate, decode.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uprompt/checkpoint.hpp"
#include "uprompt/harness.hpp"
#include "uprompt/unitizer.hpp"

using namespace uprompt;
using nlohmann::ordered_json;

namespace {

// Leftover --section.key value (or --section.key=value) args become config
// overrides, applied after the file so the command line wins.
void apply_extras(IniConfig& ini, const std::vector<std::string>& extras) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string tok = extras[i];
        if (tok.rfind("--", 0) != 0) {
            throw ConfigError("unexpected argument: " + tok);
        }
        tok = tok.substr(2);
        const auto eq = tok.find('=');
        if (eq != std::string::npos) {
            ini.apply_override(tok.substr(0, eq), tok.substr(eq + 1));
        } else {
            if (i + 1 >= extras.size()) {
                throw ConfigError("override --" + tok + " needs a value");
            }
            ini.apply_override(tok, extras[++i]);
        }
    }
}

IniConfig load_config(const std::string& path, const std::vector<std::string>& extras) {
    IniConfig ini = IniConfig::parse_file(path);
    apply_extras(ini, extras);
    return ini;
}

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

FixedVerbalizer load_fixed_verbalizer(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open verbalizer file " + path);
    }
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed verbalizer json " + path + ": " + e.what());
    }
    FixedVerbalizer verb;
    try {
        if (j.at("schema_version").get<int>() != 1) {
            throw DataError("unsupported verbalizer schema_version in " + path);
        }
        verb.label_to_unit = j.at("label_to_unit").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("verbalizer json " + path + " lacks required fields: " + e.what());
    }
    for (int y = 0; y < verb.n_labels(); ++y) {
        verb.unit_to_label[verb.label_to_unit[static_cast<std::size_t>(y)]] = y;
    }
    return verb;
}

bool is_json_path(const std::string& path) {
    return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

// Holds whichever verbalizer kind a --verbalizer path turned out to be and
// hands out a VerbalizerRef viewing it.
struct LoadedVerbalizer {
    FixedVerbalizer fixed;
    LearnableVerbalizer<float> learnable;
    bool has_fixed = false;
    bool has_learnable = false;

    VerbalizerRef<float> ref() {
        VerbalizerRef<float> r;
        if (has_fixed) {
            r.fixed = &fixed;
        }
        if (has_learnable) {
            r.learnable = &learnable;
        }
        return r;
    }
};

LoadedVerbalizer load_verbalizer(const std::string& path) {
    LoadedVerbalizer out;
    if (path.empty()) {
        return out;
    }
    if (is_json_path(path)) {
        out.fixed = load_fixed_verbalizer(path);
        out.has_fixed = true;
    } else {
        out.learnable = verbalizer_from_checkpoint<float>(load_checkpoint(path));
        out.has_learnable = true;
    }
    return out;
}

int run_quantize(const std::string& model_path, const std::vector<std::string>& inputs,
                 const std::string& out_path, bool fit, bool dedup, int k, int iters,
                 std::uint64_t seed) {
    if (fit) {
        if (k < 1) {
            throw ConfigError("--fit needs --k >= 1");
        }
        std::vector<FeatureMatrix> data;
        data.reserve(inputs.size());
        for (const auto& path : inputs) {
            data.push_back(load_features(path));
        }
        QuantizerModel model = kmeans_fit(data, k, iters, seed);
        save_quantizer(model, model_path);
        std::cout << "fit k=" << model.k << " dim=" << model.dim
                  << " iters=" << model.iters_run << " inertia=" << model.inertia() << "\n";
        return 0;
    }
    if (out_path.empty()) {
        throw ConfigError("apply mode needs --out");
    }
    const QuantizerModel model = load_quantizer(model_path);
    std::vector<UnitSeq> corpus;
    corpus.reserve(inputs.size());
    for (const auto& path : inputs) {
        UnitSeq units = quantize(model, load_features(path));
        if (dedup) {
            units = deduplicate(units);
        }
        corpus.push_back(std::move(units));
    }
    save_units(corpus, out_path);
    std::cout << "wrote " << corpus.size() << " utterances to " << out_path << "\n";
    return 0;
}

int run_datasize(const std::string& format, double seconds, int clusters, int ssl_dim) {
    AudioFormat fmt;
    if (format == "waveform") {
        fmt = AudioFormat::waveform;
    } else if (format == "ssl") {
        fmt = AudioFormat::ssl;
    } else if (format == "units") {
        if (clusters < 1) {
            throw ConfigError("--format units needs --clusters");
        }
        fmt = AudioFormat::units;
    } else {
        throw ConfigError("--format must be waveform, ssl or units");
    }
    const DataSize size = data_size_bits(fmt, seconds, clusters, ssl_dim);
    std::cout << "bits " << size.bits << "\n";
    std::cout << "ratio_to_waveform " << size.ratio_to_waveform << "\n";
    return 0;
}

int run_synth(const std::string& preset, int n, std::uint64_t seed, const std::string& out,
              int n_units, const std::string& lm_corpus, int lm_n) {
    const SynthSpec spec = preset_synth(preset);
    if (spec.n_units_used() > n_units) {
        throw ConfigError("preset " + preset + " needs " + std::to_string(spec.n_units_used()) +
                          " units, got --units " + std::to_string(n_units));
    }
    const Dataset ds = dataset_from_synth(synth_corpus(spec, seed, n));
    save_dataset(ds, out);
    std::cout << "wrote " << ds.size() << " examples to " << out << "\n";
    if (!lm_corpus.empty()) {
        const Vocabulary vocab = Vocabulary::with_units(n_units);
        const auto streams = synth_lm_corpus(spec, vocab, derive_seed(seed, 10),
                                             lm_n > 0 ? lm_n : n);
        save_units(streams, lm_corpus);
        std::cout << "wrote " << streams.size() << " pretraining streams to " << lm_corpus
                  << "\n";
    }
    return 0;
}

int run_pretrain(const std::string& config_path, const std::vector<std::string>& extras,
                 const std::string& out) {
    const IniConfig ini = load_config(config_path, extras);
    const ExperimentConfig cfg = ExperimentConfig::from_ini(ini);
    std::vector<double> losses;
    UnitLM<float> lm = pretrained_backbone(cfg, &losses);
    save_checkpoint(lm.to_checkpoint(), out);
    for (std::size_t e = 0; e < losses.size(); ++e) {
        std::cout << "epoch " << e + 1 << " loss " << losses[e] << "\n";
    }
    std::cout << "params " << lm.param_count() << "\n";
    std::cout << "hash " << std::hex << lm.param_hash() << std::dec << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int run_prompt_tune(const std::string& config_path, const std::vector<std::string>& extras,
                    const std::string& out_dir) {
    IniConfig ini = load_config(config_path, extras);
    if (!out_dir.empty()) {
        ini.set("train", "out_dir", out_dir);
    }
    const MetricsReport report = run_experiment(ini);
    std::cout << report_csv(report);
    return 0;
}

int run_eval(const std::string& config_path, const std::vector<std::string>& extras,
             const std::string& backbone_path, const std::string& prompts_path,
             const std::string& verb_path, const std::string& out, bool probe) {
    const auto t0 = std::chrono::steady_clock::now();
    const IniConfig ini = load_config(config_path, extras);
    ExperimentConfig cfg = ExperimentConfig::from_ini(ini);
    UnitLM<float> lm = UnitLM<float>::from_checkpoint(load_checkpoint(backbone_path));
    if (lm.config().to_text() != cfg.backbone.to_text()) {
        throw ConfigError("backbone checkpoint does not match the [backbone] section");
    }
    lm.freeze();
    PromptSet<float> prompts = prompts_from_checkpoint<float>(
        load_checkpoint(prompts_path), lm.config(), lm.param_hash());
    LoadedVerbalizer verb = load_verbalizer(verb_path);
    if (cfg.task.kind == TaskKind::generation) {
        if (verb.has_fixed || verb.has_learnable) {
            throw UsageError("generation tasks take no verbalizer");
        }
    } else if (!verb.has_fixed && !verb.has_learnable) {
        throw UsageError("label tasks need --verbalizer");
    }

    const TaskData data = make_task_data(cfg);
    DecodeConfig decode = cfg.decode;
    decode.max_len = cfg.decode_max_len;
    EvalResult res = evaluate_task(lm, prompts, verb.ref(), cfg.task, data.eval, decode);
    if (probe) {
        const LinearProbeResult pr =
            linear_probe_baseline(lm, data.train, data.eval, cfg.task, derive_seed(cfg.seed, 8));
        res.metrics.emplace_back("probe_accuracy", pr.accuracy);
        res.metrics.emplace_back("probe_params", static_cast<double>(pr.param_count));
        if (pr.degenerate) {
            std::cout << "# probe degenerate: fewer than two classes in train\n";
        }
    }
    for (const auto& [name, value] : res.metrics) {
        std::cout << name << " " << value << "\n";
    }
    if (!out.empty()) {
        MetricsReport report;
        report.task_name = cfg.task.name;
        report.task_kind = kind_name(cfg.task.kind);
        report.seed = cfg.seed;
        report.config_fingerprint = cfg.fingerprint;
        const TrainableCount counts =
            count_trainable(prompts, verb.has_learnable ? &verb.learnable : nullptr);
        report.trainable_prompts = counts.prompts;
        report.trainable_verbalizer = counts.verbalizer;
        report.trainable_total = counts.total;
        report.backbone_params = static_cast<long>(lm.param_count());
        report.metrics = res.metrics;
        const auto t1 = std::chrono::steady_clock::now();
        report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
        save_report(report, out);
    }
    return 0;
}

int run_generate(const std::string& backbone_path, const std::string& prompts_path,
                 const std::string& verb_path, const std::string& preset,
                 const std::string& in_path, const std::string& out_path, int beam,
                 int max_len, double alpha, bool greedy, double cond_ratio) {
    UnitLM<float> lm = UnitLM<float>::from_checkpoint(load_checkpoint(backbone_path));
    lm.freeze();
    const PromptSet<float> prompts = prompts_from_checkpoint<float>(
        load_checkpoint(prompts_path), lm.config(), lm.param_hash());
    LoadedVerbalizer verb = load_verbalizer(verb_path);
    const TaskSpec task = preset_task(preset, cond_ratio);
    if (task.kind == TaskKind::generation) {
        if (verb.has_fixed || verb.has_learnable) {
            throw UsageError("generation tasks take no verbalizer");
        }
    } else if (!verb.has_fixed && !verb.has_learnable) {
        throw UsageError("label tasks need --verbalizer");
    }

    const std::vector<UnitSeq> inputs = load_units(in_path);
    std::vector<Example> examples;
    examples.reserve(inputs.size());
    for (const auto& units : inputs) {
        Example ex;
        ex.units = units;
        examples.push_back(std::move(ex));
    }
    std::vector<BatchItem<float>> batch;
    batch.reserve(examples.size());
    for (const auto& ex : examples) {
        BatchItem<float> item;
        item.prompts = &prompts;
        item.verb = verb.ref();
        item.task = &task;
        item.input = &ex;
        item.backbone_hash = lm.param_hash();
        batch.push_back(item);
    }
    DecodeConfig cfg;
    cfg.strategy = greedy ? DecodeStrategy::greedy : DecodeStrategy::beam;
    cfg.beam_size = beam;
    cfg.max_len = max_len;  // 0 = per-example auto
    cfg.length_alpha = alpha;
    const std::vector<TaskPrediction> preds = in_batch_infer(lm, batch, cfg);

    std::ofstream out(out_path);
    if (!out) {
        throw DataError("cannot open " + out_path + " for writing");
    }
    out << ordered_json{{"schema_version", 1}}.dump() << "\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        ordered_json j;
        j["input"] = examples[i].units;
        j["labels"] = preds[i].labels;
        j["units"] = preds[i].units;
        j["logprob"] = preds[i].logprob;
        j["finished"] = preds[i].finished;
        out << j.dump() << "\n";
    }
    std::cout << "wrote " << preds.size() << " predictions to " << out_path << "\n";
    return 0;
}

int run_fewshot(const std::string& in_path, int k, std::uint64_t seed,
                const std::string& out_path) {
    const Dataset ds = load_dataset(in_path);
    const Dataset sub = fewshot_subsample(ds, k, seed);
    save_dataset(sub, out_path);
    std::cout << "kept " << sub.size() << " of " << ds.size() << " examples\n";
    return 0;
}

int run_inspect_verbalizer(const std::string& verb_path, int top, const std::string& data_path,
                           const std::string& out_path) {
    if (is_json_path(verb_path)) {
        const FixedVerbalizer verb = load_fixed_verbalizer(verb_path);
        for (int y = 0; y < verb.n_labels(); ++y) {
            std::cout << "label " << y << " -> unit " << verb.unit_for(y) << "\n";
        }
        return 0;
    }
    const LearnableVerbalizer<float> verb =
        verbalizer_from_checkpoint<float>(load_checkpoint(verb_path));
    std::vector<UnitAnnotation> annotations;
    if (!data_path.empty()) {
        const Dataset ds = load_dataset(data_path);
        const int n_units = verb.vocab_width() - Vocabulary::reserved_count;
        annotations = annotate_units(ds, n_units);
    }
    const auto rows = export_weights(verb, annotations, top);
    std::cout << "class rank unit weight symbol purity\n";
    for (const auto& row : rows) {
        std::cout << row.label << " " << row.rank << " " << row.unit << " " << row.weight;
        if (row.symbol >= 0) {
            std::cout << " " << row.symbol << " " << row.purity;
        }
        std::cout << "\n";
    }
    if (!out_path.empty()) {
        write_weights_csv(rows, out_path);
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int run_report(const std::string& in_path, bool csv) {
    const MetricsReport report = load_report(in_path);
    if (csv) {
        std::cout << report_csv(report);
        return 0;
    }
    std::cout << "task " << report.task_name << " (" << report.task_kind << ")\n";
    std::cout << "seed " << report.seed << " fingerprint " << report.config_fingerprint << "\n";
    std::cout << "trainable " << report.trainable_total << " (prompts "
              << report.trainable_prompts << ", verbalizer " << report.trainable_verbalizer
              << ") of backbone " << report.backbone_params << "\n";
    std::cout << "tune steps " << report.tune_steps << " best_step " << report.best_step
              << " best_val_loss " << report.best_val_loss
              << (report.early_stopped ? " (early stop)" : "") << "\n";
    std::cout << "wall_seconds " << report.wall_seconds << "\n";
    for (const auto& [name, value] : report.metrics) {
        std::cout << name << " " << value << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prompt tuning for frozen discrete-unit language models"};
    app.require_subcommand(1);

    // quantize
    std::string q_model, q_out;
    std::vector<std::string> q_in;
    bool q_fit = false, q_dedup = false;
    int q_k = 0, q_iters = 50;
    std::uint64_t q_seed = 0;
    auto* quantize_cmd = app.add_subcommand("quantize", "fit or apply a k-means unitizer");
    quantize_cmd->add_option("--model", q_model, "quantizer checkpoint path")->required();
    quantize_cmd->add_option("--in", q_in, "feature file(s), SPFM")->required();
    quantize_cmd->add_option("--out", q_out, "output unit text file (apply mode)");
    quantize_cmd->add_flag("--fit", q_fit, "fit a new quantizer instead of applying one");
    quantize_cmd->add_flag("--dedup", q_dedup, "collapse consecutive repeated units");
    quantize_cmd->add_option("--k", q_k, "number of clusters (fit mode)");
    quantize_cmd->add_option("--iters", q_iters, "max Lloyd iterations");
    quantize_cmd->add_option("--seed", q_seed, "fit seed");

    // datasize
    std::string d_format;
    double d_seconds = 0.0;
    int d_clusters = 0, d_ssl_dim = 1024;
    auto* datasize_cmd = app.add_subcommand("datasize", "storage cost of an audio format");
    datasize_cmd->add_option("--format", d_format, "waveform | ssl | units")->required();
    datasize_cmd->add_option("--seconds", d_seconds, "duration in seconds")->required();
    datasize_cmd->add_option("--clusters", d_clusters, "cluster count for units");
    datasize_cmd->add_option("--ssl-dim", d_ssl_dim, "feature width for ssl");

    // synth
    std::string s_preset, s_out, s_lm_corpus;
    int s_n = 0, s_units = 100, s_lm_n = 0;
    std::uint64_t s_seed = 0;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic task dataset");
    synth_cmd->add_option("--preset", s_preset, "cls8 | trans12 | cont")->required();
    synth_cmd->add_option("--n", s_n, "number of examples")->required();
    synth_cmd->add_option("--seed", s_seed, "generator seed")->required();
    synth_cmd->add_option("--out", s_out, "output dataset JSONL")->required();
    synth_cmd->add_option("--units", s_units, "unit vocabulary size");
    synth_cmd->add_option("--lm-corpus", s_lm_corpus, "also write pretraining unit streams");
    synth_cmd->add_option("--lm-n", s_lm_n, "stream count for --lm-corpus (default --n)");

    // pretrain
    std::string p_config, p_out;
    auto* pretrain_cmd = app.add_subcommand("pretrain", "pretrain a backbone from a config");
    pretrain_cmd->add_option("--config", p_config, "config file")->required();
    pretrain_cmd->add_option("--out", p_out, "backbone checkpoint path")->required();
    pretrain_cmd->allow_extras();

    // prompt-tune
    std::string t_config, t_out_dir;
    auto* tune_cmd =
        app.add_subcommand("prompt-tune", "pretrain (or load), tune prompts and evaluate");
    tune_cmd->add_option("--config", t_config, "config file")->required();
    tune_cmd->add_option("--out-dir", t_out_dir, "artifact directory (overrides train.out_dir)");
    tune_cmd->allow_extras();

    // eval
    std::string e_config, e_backbone, e_prompts, e_verb, e_out;
    bool e_probe = false;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate tuned prompts on the held-out set");
    eval_cmd->add_option("--config", e_config, "config file")->required();
    eval_cmd->add_option("--backbone", e_backbone, "backbone checkpoint")->required();
    eval_cmd->add_option("--prompts", e_prompts, "prompt checkpoint")->required();
    eval_cmd->add_option("--verbalizer", e_verb, "verbalizer (.spul learnable, .json fixed)");
    eval_cmd->add_option("--out", e_out, "write a report JSON here");
    eval_cmd->add_flag("--probe", e_probe, "also run the linear-probe baseline");
    eval_cmd->allow_extras();

    // generate
    std::string g_backbone, g_prompts, g_verb, g_task, g_in, g_out;
    int g_beam = 5, g_max_len = 0;
    double g_alpha = 0.0, g_cond = 0.25;
    bool g_greedy = false;
    auto* gen_cmd = app.add_subcommand("generate", "decode unit files with tuned prompts");
    gen_cmd->add_option("--backbone", g_backbone, "backbone checkpoint")->required();
    gen_cmd->add_option("--prompts", g_prompts, "prompt checkpoint")->required();
    gen_cmd->add_option("--verbalizer", g_verb, "verbalizer (.spul learnable, .json fixed)");
    gen_cmd->add_option("--task", g_task, "task preset: cls8 | trans12 | cont")->required();
    gen_cmd->add_option("--in", g_in, "input unit text file, one utterance per line")
        ->required();
    gen_cmd->add_option("--out", g_out, "output predictions JSONL")->required();
    gen_cmd->add_option("--beam", g_beam, "beam size");
    gen_cmd->add_option("--max-len", g_max_len, "decode budget (0 = auto)");
    gen_cmd->add_option("--alpha", g_alpha, "length-normalization exponent");
    gen_cmd->add_option("--cond-ratio", g_cond, "continuation seed fraction");
    gen_cmd->add_flag("--greedy", g_greedy, "greedy decoding instead of beam");

    // fewshot
    std::string f_in, f_out;
    int f_k = 0;
    std::uint64_t f_seed = 0;
    auto* fewshot_cmd = app.add_subcommand("fewshot", "class-balanced k-shot subsample");
    fewshot_cmd->add_option("--in", f_in, "input dataset JSONL")->required();
    fewshot_cmd->add_option("--k", f_k, "examples per class")->required();
    fewshot_cmd->add_option("--seed", f_seed, "sampling seed")->required();
    fewshot_cmd->add_option("--out", f_out, "output dataset JSONL")->required();

    // inspect-verbalizer
    std::string iv_verb, iv_data, iv_out;
    int iv_top = 5;
    auto* inspect_cmd =
        app.add_subcommand("inspect-verbalizer", "top-weighted units per class");
    inspect_cmd->add_option("--verbalizer", iv_verb, "verbalizer (.spul or .json)")->required();
    inspect_cmd->add_option("--top", iv_top, "units per class");
    inspect_cmd->add_option("--data", iv_data, "dataset JSONL for symbol annotations");
    inspect_cmd->add_option("--out", iv_out, "write CSV here");

    // report
    std::string r_in;
    bool r_csv = false;
    auto* report_cmd = app.add_subcommand("report", "print a report JSON");
    report_cmd->add_option("--in", r_in, "report JSON path")->required();
    report_cmd->add_flag("--csv", r_csv, "CSV output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (quantize_cmd->parsed()) {
            return run_quantize(q_model, q_in, q_out, q_fit, q_dedup, q_k, q_iters, q_seed);
        }
        if (datasize_cmd->parsed()) {
            return run_datasize(d_format, d_seconds, d_clusters, d_ssl_dim);
        }
        if (synth_cmd->parsed()) {
            return run_synth(s_preset, s_n, s_seed, s_out, s_units, s_lm_corpus, s_lm_n);
        }
        if (pretrain_cmd->parsed()) {
            return run_pretrain(p_config, pretrain_cmd->remaining(), p_out);
        }
        if (tune_cmd->parsed()) {
            return run_prompt_tune(t_config, tune_cmd->remaining(), t_out_dir);
        }
        if (eval_cmd->parsed()) {
            return run_eval(e_config, eval_cmd->remaining(), e_backbone, e_prompts, e_verb,
                            e_out, e_probe);
        }
        if (gen_cmd->parsed()) {
            return run_generate(g_backbone, g_prompts, g_verb, g_task, g_in, g_out, g_beam,
                                g_max_len, g_alpha, g_greedy, g_cond);
        }
        if (fewshot_cmd->parsed()) {
            return run_fewshot(f_in, f_k, f_seed, f_out);
        }
        if (inspect_cmd->parsed()) {
            return run_inspect_verbalizer(iv_verb, iv_top, iv_data, iv_out);
        }
        if (report_cmd->parsed()) {
            return run_report(r_in, r_csv);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
