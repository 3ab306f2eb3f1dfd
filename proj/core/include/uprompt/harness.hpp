#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uprompt/dataset.hpp"
#include "uprompt/decode.hpp"
#include "uprompt/metrics.hpp"
#include "uprompt/prompts.hpp"
#include "uprompt/synth.hpp"
#include "uprompt/unitlm.hpp"

namespace uprompt {

/// Sectioned key = value config text ([backbone], [task], [prompts],
/// [verbalizer], [train], [decode]). '#' and ';' start comments. Every field
/// can be overridden from the command line as --section.key value.
struct IniConfig {
    std::map<std::string, std::map<std::string, std::string>> sections;

    static IniConfig parse_file(const std::string& path);
    static IniConfig parse_text(const std::string& text);

    void set(const std::string& section, const std::string& key, const std::string& value);
    /// dotted = "section.key".
    void apply_override(const std::string& dotted, const std::string& value);

    bool has(const std::string& section, const std::string& key) const;
    const std::string& get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    double get_double(const std::string& section, const std::string& key,
                      double fallback) const;
    bool get_flag(const std::string& section, const std::string& key, bool fallback) const;

    /// Sorted canonical rendering; equal configs render identically.
    std::string canonical_text() const;
    /// 16-hex-digit digest of canonical_text; the reproducibility key.
    std::string fingerprint() const;
};

/// Deterministic per-purpose seed derivation from one master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt);

/// Artifact cache directory from the UPROMPT_CACHE_DIR environment
/// variable; empty string when unset (caching disabled).
std::string cache_dir();

SynthSpec preset_synth(const std::string& preset);
TaskSpec preset_task(const std::string& preset, double cond_ratio);

/// Typed view over an IniConfig. Unlisted keys fall back to the documented
/// defaults; [train] seed is mandatory.
struct ExperimentConfig {
    LMConfig backbone;
    std::string preset;  // cls8 | trans12 | cont
    TaskSpec task;
    SynthSpec synth;
    int n_train = 400;
    int n_eval = 100;
    int fewshot_k = 0;  // 0 = full data
    int prompt_len = 5;
    bool use_input = true;
    bool use_deep = true;
    std::string verbalizer_kind;  // fixed | learnable | none
    double tau = 0.01;
    int pretrain_epochs = 6;
    int corpus_size = 1200;
    double pretrain_lr = 3e-3;
    TuneConfig tune;
    int val_split_every = 5;
    DecodeConfig decode;
    int decode_max_len = 0;  // 0 = per-example auto
    std::uint64_t seed = 0;
    std::string dataset_path;       // optional JSONL instead of synthesis
    std::string eval_dataset_path;  // ditto for the held-out set
    std::string backbone_ckpt;      // optional: load instead of pretraining
    std::string out_dir;
    std::string fingerprint;  // filled by from_ini; lands in the report

    static ExperimentConfig from_ini(const IniConfig& ini);
};

/// Pretraining streams for the backbone variant: next-token streams with the
/// separator convention for decoder-only models, plain utterances for
/// denoising.
std::vector<UnitSeq> pretrain_streams(const SynthSpec& spec, const Vocabulary& vocab,
                                      LMVariant variant, std::uint64_t seed, int n);

/// Builds the pretrained frozen-ready backbone for a config: loads
/// backbone_ckpt when set, otherwise pretrains on synthetic streams (serving
/// from the cache directory when UPROMPT_CACHE_DIR is set). The returned
/// model is not yet frozen.
UnitLM<float> pretrained_backbone(const ExperimentConfig& cfg,
                                  std::vector<double>* epoch_losses = nullptr);

struct TaskData {
    Dataset train;
    Dataset val;
    Dataset eval;
};

/// Materializes train/val/eval datasets from synthesis or the configured
/// JSONL paths, applying the few-shot protocol before the train/val split.
TaskData make_task_data(const ExperimentConfig& cfg);

/// One item of a heterogeneous inference batch over a shared frozen
/// backbone. backbone_hash pins which backbone the item's prompts were tuned
/// for; a mismatch with the serving model is an error.
template <class T>
struct BatchItem {
    const PromptSet<T>* prompts = nullptr;
    VerbalizerRef<T> verb;
    const TaskSpec* task = nullptr;
    const Example* input = nullptr;
    std::uint64_t backbone_hash = 0;
};

/// Runs a mixed-task batch item by item; outputs equal the corresponding
/// solo predict_example calls exactly.
template <class T>
std::vector<TaskPrediction> in_batch_infer(const UnitLM<T>& lm,
                                           const std::vector<BatchItem<T>>& batch,
                                           const DecodeConfig& cfg);

struct EvalResult {
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<TaskPrediction> predictions;
};

/// Decodes every eval example and computes the task's metrics: accuracy for
/// classification; edit-distance rate (plus slot F1 when marker_min >= 0)
/// for sequence tasks; target log-likelihood, BLEU and Auto-BLEU for
/// generation. base.max_len == 0 picks a per-example length budget.
template <class T>
EvalResult evaluate_task(const UnitLM<T>& lm, const PromptSet<T>& prompts,
                         VerbalizerRef<T> verb, const TaskSpec& task, const Dataset& eval,
                         const DecodeConfig& base, int marker_min = -1);

struct LinearProbeResult {
    double accuracy = 0.0;
    long param_count = 0;
    bool degenerate = false;  // fewer than two classes present
};

/// The "pre-train, fine-tune" comparison point: a linear softmax classifier
/// on frozen mean-pooled unit embeddings, trained with full-batch Adam.
template <class T>
LinearProbeResult linear_probe_baseline(const UnitLM<T>& lm, const Dataset& train,
                                        const Dataset& eval, const TaskSpec& task,
                                        std::uint64_t seed);

struct MetricsReport {
    int schema_version = 1;
    std::string task_name;
    std::string task_kind;
    std::uint64_t seed = 0;
    std::string config_fingerprint;
    long trainable_prompts = 0;
    long trainable_verbalizer = 0;
    long trainable_total = 0;
    long backbone_params = 0;
    int tune_steps = 0;
    int best_step = 0;
    double best_val_loss = 0.0;
    bool early_stopped = false;
    double wall_seconds = 0.0;
    std::vector<std::pair<std::string, double>> metrics;

    double metric(const std::string& name) const;  // DataError when absent
};

void save_report(const MetricsReport& report, const std::string& path);
MetricsReport load_report(const std::string& path);
std::string report_csv(const MetricsReport& report);

/// pretrain (or load) -> freeze -> prompt-tune -> evaluate. Writes
/// checkpoints, the report and the verbalizer weight CSV into
/// cfg.out_dir when set.
MetricsReport run_experiment(const ExperimentConfig& cfg);
MetricsReport run_experiment(const IniConfig& ini);

}  // namespace uprompt
