// Acceptance gate: fifteen numbered checks over the whole stack, from the
// bit-accounting arithmetic to end-to-end prompt tuning. Prints one
// [PASS]/[FAIL] line per criterion; --only N runs a single one. Exit code 0
// iff everything selected passed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gradcheck.hpp"
#include "uprompt/harness.hpp"

using namespace uprompt;

namespace {

// Pinned tolerances. Exact claims use equality on doubles produced by the
// same arithmetic; everything else lists its slack here.
constexpr double kCloseTol = 1e-12;      // closed-form f64 arithmetic
constexpr double kGradTol = 1e-4;        // analytic vs central differences
constexpr double kOneHotTol = 1e-6;      // near-one-hot class embeddings
constexpr double kUniformTol = 1e-9;     // uniform-row class embeddings
constexpr double kRatioSlack = 0.05;     // published rounded ratios
constexpr double kParamSlack = 0.05;     // published parameter counts
constexpr double kFullAccuracy = 0.90;   // full-data classification
constexpr double kFewshotAccuracy = 0.70;
constexpr double kCerCeiling = 0.10;     // transcription error rate
constexpr double kTopUnitHitRate = 0.80; // interpretability hit fraction

struct Checker {
    bool ok = true;
    std::vector<std::string> notes;
    std::string info;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            notes.push_back(what);
        }
    }
    void set_info(const std::string& s) { info = s; }
};

bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

bool within_frac(double value, double target, double frac) {
    return std::fabs(value - target) <= frac * std::fabs(target);
}

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

double eval_metric(const EvalResult& res, const std::string& name) {
    for (const auto& [key, value] : res.metrics) {
        if (key == name) {
            return value;
        }
    }
    throw DataError("evaluation produced no metric " + name);
}

// ---------------------------------------------------------------- criterion 1

// Storage cost table for one second of speech in each representation.
void c01_data_sizes(Checker& c) {
    const DataSize wav = data_size_bits(AudioFormat::waveform, 1.0);
    const DataSize ssl = data_size_bits(AudioFormat::ssl, 1.0);
    const DataSize u100 = data_size_bits(AudioFormat::units, 1.0, 100);
    const DataSize u1000 = data_size_bits(AudioFormat::units, 1.0, 1000);

    c.expect(wav.bits == 256000.0, "waveform bits " + fmt(wav.bits) + " != 256000");
    c.expect(wav.ratio_to_waveform == 1.0, "waveform ratio != 1");
    c.expect(ssl.bits == 1638400.0, "ssl bits " + fmt(ssl.bits) + " != 1638400");
    c.expect(close(ssl.ratio_to_waveform, 6.4, kCloseTol),
             "ssl ratio " + fmt(ssl.ratio_to_waveform) + " != 6.4");
    c.expect(u100.bits == 350.0, "units(100) bits " + fmt(u100.bits) + " != 350");
    c.expect(u1000.bits == 500.0, "units(1000) bits " + fmt(u1000.bits) + " != 500");

    // The published ratio column rounds to one significant digit: 350/256000
    // prints as ~1e-3 and 500/256000 as ~2e-3.
    c.expect(close(u100.ratio_to_waveform, 350.0 / 256000.0, kCloseTol),
             "units(100) ratio is not 350/256000");
    c.expect(close(u1000.ratio_to_waveform, 500.0 / 256000.0, kCloseTol),
             "units(1000) ratio is not 500/256000");
    auto round_sig1 = [](double x) {
        const double e = std::floor(std::log10(x));
        return std::round(x / std::pow(10.0, e)) * std::pow(10.0, e);
    };
    c.expect(close(round_sig1(u100.ratio_to_waveform), 1e-3, 1e-15),
             "units(100) ratio does not round to 1e-3");
    c.expect(close(round_sig1(u1000.ratio_to_waveform), 2e-3, 1e-15),
             "units(1000) ratio does not round to 2e-3");
    c.expect(within_frac(u1000.ratio_to_waveform, 2e-3, kRatioSlack),
             "units(1000) ratio " + fmt(u1000.ratio_to_waveform) +
                 " not within 5% of 2e-3");

    // Linear in duration.
    const DataSize wav_t = data_size_bits(AudioFormat::waveform, 3.5);
    c.expect(wav_t.bits == 3.5 * 256000.0, "waveform bits not linear in seconds");
    c.set_info("ratios " + fmt(u100.ratio_to_waveform) + " / " +
               fmt(u1000.ratio_to_waveform));
}

// ---------------------------------------------------------------- criterion 2

// Learnable verbalizer size for 28 labels over a 1000-entry vocabulary.
void c02_verbalizer_budget(Checker& c) {
    const Vocabulary vocab = Vocabulary::with_units(995);  // 995 + 5 reserved
    c.expect(vocab.size == 1000, "vocabulary size != 1000");
    const auto verb = make_learnable_verbalizer<float>(28, vocab, 0.01);
    const long n = static_cast<long>(verb.W.numel());
    c.expect(n == 28000, "verbalizer holds " + std::to_string(n) + " != 28000 weights");
    c.expect(n < 30000, "verbalizer budget >= 30000");

    LMConfig tiny;
    tiny.n_units = 995;
    const PromptSet<float> none = init_prompts<float>(tiny, 0, 1);
    const TrainableCount counts = count_trainable(none, &verb);
    c.expect(counts.verbalizer == 28000, "count_trainable.verbalizer != 28000");
    c.expect(counts.total == 28000, "count_trainable.total != 28000 with empty prompts");
    c.set_info(std::to_string(n) + " weights");
}

// ---------------------------------------------------------------- criterion 3

// Published prompt parameter counts for the two full-scale shapes.
void c03_prompt_param_counts(Checker& c) {
    LMConfig gslm;
    gslm.variant = LMVariant::decoder_only;
    gslm.n_layers = 12;
    gslm.n_heads = 16;
    gslm.d_model = 1024;
    gslm.d_ffn = 4096;
    const long g = prompt_param_formula(gslm, 180);
    c.expect(within_frac(static_cast<double>(g), 4.5e6, kParamSlack),
             "decoder-only l=180 count " + std::to_string(g) + " not within 5% of 4.5M");
    const PromptSet<float> gp = init_prompts<float>(gslm, 180, 1);
    c.expect(count_trainable(gp, static_cast<const LearnableVerbalizer<float>*>(nullptr))
                     .prompts == g,
             "enumerated decoder-only count disagrees with the closed form");

    LMConfig mbart;
    mbart.variant = LMVariant::encoder_decoder;
    mbart.n_layers = 12;  // 24 self-attention layers across both stacks
    mbart.n_heads = 16;
    mbart.d_model = 1024;
    mbart.d_ffn = 4096;
    const long m = prompt_param_formula(mbart, 50);
    c.expect(within_frac(static_cast<double>(m), 2.6e6, kParamSlack),
             "encoder-decoder l=50 count " + std::to_string(m) + " not within 5% of 2.6M");
    const PromptSet<float> mp = init_prompts<float>(mbart, 50, 2);
    c.expect(count_trainable(mp, static_cast<const LearnableVerbalizer<float>*>(nullptr))
                     .prompts == m,
             "enumerated encoder-decoder count disagrees with the closed form");
    c.set_info(std::to_string(g) + " / " + std::to_string(m));
}

// ---------------------------------------------------------------- criterion 4

// Central differences with grad-recording forwards. dropout is an identity
// map under NoGradGuard, so the usual guarded FD loop would probe the wrong
// function; rebuilding the graph keeps the (reseeded) mask live instead.
testing::GradReport gradcheck_graphed(std::vector<Tensor<double>> params,
                                      const std::function<Tensor<double>()>& loss_fn,
                                      double eps = 1e-5) {
    for (auto& p : params) {
        p.set_requires_grad(true);
    }
    Tensor<double> loss = loss_fn();
    loss.zero_grad_graph();
    loss.backward();
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) {
        std::vector<double> g = p.grad();
        if (g.empty()) {
            g.assign(p.numel(), 0.0);
        }
        analytic.push_back(std::move(g));
    }
    testing::GradReport rep;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + eps;
            const double up = static_cast<double>(loss_fn().item());
            vals[i] = saved - eps;
            const double down = static_cast<double>(loss_fn().item());
            vals[i] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double g = analytic[pi][i];
            const double scale = std::max({1.0, std::fabs(fd), std::fabs(g)});
            rep.max_rel_err = std::max(rep.max_rel_err, std::fabs(fd - g) / scale);
            ++rep.checked;
        }
    }
    return rep;
}

// Every differentiable op against central finite differences in f64.
void c04_gradient_oracle(Checker& c) {
    using testing::GradReport;
    using testing::gradcheck;
    using testing::rand_matrix;

    constexpr int kCases = 50;
    Rng rng(271828);

    struct OpResult {
        double max_err = 0.0;
        int cases = 0;
    };
    std::vector<std::pair<std::string, OpResult>> results;

    auto run_op = [&](const std::string& name,
                      const std::function<GradReport(Rng&)>& once) {
        OpResult r;
        for (int i = 0; i < kCases; ++i) {
            const GradReport rep = once(rng);
            r.max_err = std::max(r.max_err, rep.max_rel_err);
            ++r.cases;
        }
        results.emplace_back(name, r);
    };

    auto dims = [&]() { return std::pair<int, int>{rng.range(1, 4), rng.range(2, 5)}; };

    run_op("add", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r), b = rand_matrix({m, n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({a, b}, [=]() { return sum(mul(add(a, b), w)); });
    });
    run_op("sub", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r), b = rand_matrix({m, n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({a, b}, [=]() { return sum(mul(sub(a, b), w)); });
    });
    run_op("mul", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r), b = rand_matrix({m, n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({a, b}, [=]() { return sum(mul(mul(a, b), w)); });
    });
    run_op("scale", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        const double k = r.uniform() * 4.0 - 2.0;
        return gradcheck({a}, [=]() { return sum(mul(scale(a, k), w)); });
    });
    run_op("add_rowvec", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r), v = rand_matrix({n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({a, v}, [=]() { return sum(mul(add_rowvec(a, v), w)); });
    });
    run_op("matmul", [&](Rng& r) {
        const int m = r.range(1, 3), k = r.range(1, 4), n = r.range(1, 3);
        Tensor<double> a = rand_matrix({m, k}, r), b = rand_matrix({k, n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({a, b}, [=]() { return sum(mul(matmul(a, b), w)); });
    });
    run_op("matmul_nt", [&](Rng& r) {
        const int m = r.range(1, 3), k = r.range(1, 4), n = r.range(1, 3);
        Tensor<double> a = rand_matrix({m, k}, r), b = rand_matrix({n, k}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({a, b}, [=]() { return sum(mul(matmul_nt(a, b), w)); });
    });
    run_op("matvec", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r), v = rand_matrix({n}, r);
        Tensor<double> w = rand_matrix({m}, r);
        return gradcheck({a, v}, [=]() { return sum(mul(matvec(a, v), w)); });
    });
    run_op("relu", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r, /*avoid_zero=*/true);
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({a}, [=]() { return sum(mul(relu(a), w)); });
    });
    run_op("gelu", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({a}, [=]() { return sum(mul(gelu(a), w)); });
    });
    run_op("softmax_rows", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({a}, [=]() { return sum(mul(softmax_rows(a), w)); });
    });
    run_op("softmax_rows_masked", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        std::vector<int> valid;
        for (int i = 0; i < m; ++i) {
            valid.push_back(r.range(1, n));
        }
        return gradcheck({a}, [=]() { return sum(mul(softmax_rows_masked(a, valid), w)); });
    });
    run_op("log_softmax_rows", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({a}, [=]() { return sum(mul(log_softmax_rows(a), w)); });
    });
    run_op("layer_norm_rows", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r);
        Tensor<double> g = rand_matrix({n}, r), b = rand_matrix({n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({a, g, b}, [=]() { return sum(mul(layer_norm_rows(a, g, b), w)); });
    });
    run_op("gather_rows", [&](Rng& r) {
        const int t = r.range(2, 5), n = r.range(2, 4), m = r.range(2, 5);
        Tensor<double> table = rand_matrix({t, n}, r);
        std::vector<int> ids;
        for (int i = 0; i < m; ++i) {
            ids.push_back(r.below_int(t));  // repeats exercise scatter-add
        }
        Tensor<double> w = rand_matrix({m, n}, r);
        return gradcheck({table}, [=]() { return sum(mul(gather_rows(table, ids), w)); });
    });
    run_op("concat_rows", [&](Rng& r) {
        const int m1 = r.range(1, 3), m2 = r.range(1, 3), n = r.range(2, 4);
        Tensor<double> a = rand_matrix({m1, n}, r), b = rand_matrix({m2, n}, r);
        Tensor<double> w = rand_matrix({m1 + m2, n}, r);
        return gradcheck({a, b}, [=]() { return sum(mul(concat_rows(a, b), w)); });
    });
    run_op("concat_cols", [&](Rng& r) {
        const int m = r.range(1, 3), n1 = r.range(1, 3), n2 = r.range(1, 3);
        Tensor<double> a = rand_matrix({m, n1}, r), b = rand_matrix({m, n2}, r);
        Tensor<double> w = rand_matrix({m, n1 + n2}, r);
        return gradcheck({a, b}, [=]() { return sum(mul(concat_cols(a, b), w)); });
    });
    run_op("concat_vec", [&](Rng& r) {
        const int n1 = r.range(1, 4), n2 = r.range(1, 4);
        Tensor<double> a = rand_matrix({n1}, r), b = rand_matrix({n2}, r);
        Tensor<double> w = rand_matrix({n1 + n2}, r);
        return gradcheck({a, b}, [=]() { return sum(mul(concat_vec(a, b), w)); });
    });
    run_op("slice_rows", [&](Rng& r) {
        const int m = r.range(2, 5), n = r.range(2, 4);
        const int r0 = r.below_int(m), r1 = r.range(r0 + 1, m);
        Tensor<double> a = rand_matrix({m, n}, r);
        Tensor<double> w = rand_matrix({r1 - r0, n}, r);
        return gradcheck({a}, [=]() { return sum(mul(slice_rows(a, r0, r1), w)); });
    });
    run_op("slice_cols", [&](Rng& r) {
        const int m = r.range(1, 4), n = r.range(2, 5);
        const int c0 = r.below_int(n), c1 = r.range(c0 + 1, n);
        Tensor<double> a = rand_matrix({m, n}, r);
        Tensor<double> w = rand_matrix({m, c1 - c0}, r);
        return gradcheck({a}, [=]() { return sum(mul(slice_cols(a, c0, c1), w)); });
    });
    run_op("slice_vec", [&](Rng& r) {
        const int n = r.range(2, 6);
        const int i0 = r.below_int(n), i1 = r.range(i0 + 1, n);
        Tensor<double> a = rand_matrix({n}, r);
        Tensor<double> w = rand_matrix({i1 - i0}, r);
        return gradcheck({a}, [=]() { return sum(mul(slice_vec(a, i0, i1), w)); });
    });
    run_op("sum", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r);
        return gradcheck({a}, [=]() { return sum(a); });
    });
    run_op("mean", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r);
        return gradcheck({a}, [=]() { return mean(a); });
    });
    run_op("dropout", [&](Rng& r) {
        auto [m, n] = dims();
        Tensor<double> a = rand_matrix({m, n}, r);
        Tensor<double> w = rand_matrix({m, n}, r);
        const std::uint64_t mask_seed = r.raw();
        // reseeding per call keeps the mask constant across FD evaluations
        return gradcheck_graphed({a}, [=]() {
            Rng mask_rng(mask_seed);
            return sum(mul(dropout(a, 0.35, mask_rng), w));
        });
    });
    run_op("cross_entropy_rows", [&](Rng& r) {
        const int m = r.range(2, 4), n = r.range(2, 5);
        Tensor<double> a = rand_matrix({m, n}, r);
        std::vector<int> targets;
        for (int i = 0; i < m; ++i) {
            targets.push_back(i == 1 && r.uniform() < 0.3 ? -1 : r.below_int(n));
        }
        if (targets[0] < 0) {
            targets[0] = 0;
        }
        return gradcheck({a}, [=]() { return cross_entropy_rows(a, targets, -1); });
    });
    run_op("cross_entropy", [&](Rng& r) {
        const int n = r.range(2, 6);
        Tensor<double> a = rand_matrix({n}, r);
        const int target = r.below_int(n);
        return gradcheck({a}, [=]() { return cross_entropy(a, target); });
    });

    double worst = 0.0;
    std::string worst_op;
    int total_cases = 0;
    for (const auto& [name, r] : results) {
        total_cases += r.cases;
        if (r.max_err > worst) {
            worst = r.max_err;
            worst_op = name;
        }
        c.expect(r.cases >= 50, name + ": only " + std::to_string(r.cases) + " cases");
        c.expect(r.max_err <= kGradTol,
                 name + ": max rel err " + fmt(r.max_err) + " > " + fmt(kGradTol));
    }
    c.set_info("worst " + fmt(worst) + " (" + worst_op + "), " +
               std::to_string(results.size()) + " ops x 50 cases, " +
               std::to_string(total_cases) + " total");
}

// ---------------------------------------------------------------- criterion 5

// 500 tuning steps leave the frozen backbone bit-identical while moving
// every prompt tensor.
void c05_frozen_invariance(Checker& c) {
    LMConfig cfg;
    cfg.variant = LMVariant::decoder_only;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.d_ffn = 32;
    cfg.n_units = 8;
    cfg.max_positions = 32;
    cfg.dropout = 0.0;
    UnitLM<float> lm(cfg, 404);
    lm.freeze();

    TaskSpec task;
    task.name = "invariance-cls";
    task.kind = TaskKind::classification;
    task.n_labels = 2;
    Dataset train, val;
    for (int i = 0; i < 8; ++i) {
        Example ex;
        ex.units = i % 2 == 0 ? UnitSeq{1, 3, 1} : UnitSeq{2, 4, 2};
        ex.class_id = i % 2;
        (i < 6 ? train : val).examples.push_back(ex);
    }
    const FixedVerbalizer verb = fixed_from_seed(2, lm.vocab(), 5);
    VerbalizerRef<float> vref;
    vref.fixed = &verb;

    PromptSet<float> prompts = init_prompts<float>(cfg, 5, 99);
    const PromptSet<float> before = prompts.clone_values();
    const std::uint64_t hash_before = lm.param_hash();

    TuneConfig tc;
    tc.max_steps = 500;
    tc.validate_every = 100;
    tc.patience = 1000;  // never stop early: the run must reach 500 steps
    tc.seed = 17;
    const TuneResult res = prompt_tune(lm, prompts, vref, task, train, val, tc);

    c.expect(res.steps_run == 500, "tuning ran " + std::to_string(res.steps_run) +
                                       " steps instead of 500");
    c.expect(lm.param_hash() == hash_before, "backbone hash changed during tuning");
    const auto now = prompts.trainable_tensors();
    const auto old = before.trainable_tensors();
    c.expect(now.size() == old.size() && !now.empty(), "prompt tensor census changed");
    for (std::size_t t = 0; t < now.size() && t < old.size(); ++t) {
        bool moved = false;
        for (std::size_t i = 0; i < now[t].numel(); ++i) {
            if (now[t].values()[i] != old[t].values()[i]) {
                moved = true;
                break;
            }
        }
        c.expect(moved, "prompt tensor " + std::to_string(t) + " never changed");
    }
    c.set_info("hash " + std::to_string(hash_before) + " stable over 500 steps");
}

// ---------------------------------------------------------------- criterion 6

// Beam search against exhaustive enumeration on pseudo-random tiny models.
class HashScorer : public Scorer {
public:
    HashScorer(int space, int eos, std::uint64_t seed)
        : space_(space), eos_(eos), seed_(seed) {}

    int space_size() const override { return space_; }
    int eos_id() const override { return eos_; }

    std::vector<double> step_logprobs(const std::vector<int>& prefix) const override {
        std::uint64_t h = seed_ ^ 0x9e3779b97f4a7c15ull;
        for (int id : prefix) {
            h = (h ^ static_cast<std::uint64_t>(id + 1)) * 0x100000001b3ull;
        }
        std::vector<double> lp(static_cast<std::size_t>(space_));
        for (auto& v : lp) {
            h = h * 6364136223846793005ull + 1442695040888963407ull;
            v = static_cast<double>(h >> 11) / 9007199254740992.0 * 6.0 - 3.0;
        }
        double mx = lp[0];
        for (double v : lp) mx = std::max(mx, v);
        double total = 0.0;
        for (double v : lp) total += std::exp(v - mx);
        const double log_z = mx + std::log(total);
        for (double& v : lp) v -= log_z;
        return lp;
    }

private:
    int space_;
    int eos_;
    std::uint64_t seed_;
};

void enumerate_all(const Scorer& s, std::vector<int>& prefix, double logprob, int max_len,
                   std::vector<Hypothesis>& out) {
    if (static_cast<int>(prefix.size()) == max_len) {
        out.push_back(Hypothesis{prefix, logprob, false});
        return;
    }
    const std::vector<double> lp = s.step_logprobs(prefix);
    out.push_back(
        Hypothesis{prefix, logprob + lp[static_cast<std::size_t>(s.eos_id())], true});
    for (int id = 0; id < s.space_size(); ++id) {
        if (id == s.eos_id()) {
            continue;
        }
        prefix.push_back(id);
        enumerate_all(s, prefix, logprob + lp[static_cast<std::size_t>(id)], max_len, out);
        prefix.pop_back();
    }
}

bool ranked_before(const Hypothesis& a, const Hypothesis& b, double alpha) {
    const double sa = hypothesis_score(a, alpha);
    const double sb = hypothesis_score(b, alpha);
    if (sa != sb) {
        return sa > sb;
    }
    if (a.finished != b.finished) {
        return a.finished;
    }
    return a.units < b.units;
}

void c06_beam_oracle(Checker& c) {
    const int grid[][3] = {{2, 1, 2}, {3, 0, 3}, {3, 2, 2}, {4, 3, 3}, {4, 1, 3}};
    int models = 0;
    for (const auto& g : grid) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const HashScorer scorer(g[0], g[1], seed * 7919);
            DecodeConfig cfg;
            cfg.beam_size = 64;  // wider than any level, so nothing is pruned
            cfg.max_len = g[2];
            cfg.length_alpha = seed % 2 == 0 ? 0.7 : 0.0;
            const auto beams = beam_decode(scorer, cfg);

            std::vector<Hypothesis> all;
            std::vector<int> prefix;
            enumerate_all(scorer, prefix, 0.0, cfg.max_len, all);
            std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
                return ranked_before(a, b, cfg.length_alpha);
            });
            const std::size_t want =
                std::min(all.size(), static_cast<std::size_t>(cfg.beam_size));
            std::ostringstream id;
            id << "space " << g[0] << " eos " << g[1] << " len " << g[2] << " seed "
               << seed;
            c.expect(beams.size() == want, id.str() + ": beam count mismatch");
            for (std::size_t i = 0; i < std::min(want, beams.size()); ++i) {
                c.expect(beams[i].units == all[i].units,
                         id.str() + ": sequence mismatch at rank " + std::to_string(i));
                c.expect(beams[i].finished == all[i].finished,
                         id.str() + ": finished flag mismatch at rank " + std::to_string(i));
                c.expect(beams[i].logprob == all[i].logprob,
                         id.str() + ": logprob mismatch at rank " + std::to_string(i));
                for (int u : beams[i].units) {
                    c.expect(u != scorer.eos_id(), id.str() + ": eos emitted as a unit");
                }
            }
            ++models;
        }
    }
    c.expect(models >= 20, "only " + std::to_string(models) + " models checked");
    c.set_info(std::to_string(models) + " models, full-beam equality");
}

// ---------------------------------------------------------------- criterion 7

// Class-embedding limits: one-hot rows snap to the mapped embedding, uniform
// rows reproduce the embedding mean.
void c07_class_embedding_limits(Checker& c) {
    const Vocabulary vocab = Vocabulary::with_units(20);
    const int V = vocab.size;
    const int d = 12;
    Rng rng(4242);
    const Tensor<double> embed = Tensor<double>::randn({V, d}, rng, 1.0);

    auto one_hot = make_learnable_verbalizer<double>(4, vocab, 0.01);
    const int mapped[4] = {3, 17, 9, 0};
    for (int y = 0; y < 4; ++y) {
        one_hot.W.values()[static_cast<std::size_t>(y) * V + mapped[y]] = 1.0;
    }
    const Tensor<double> hot = class_embeddings(one_hot, embed);
    double worst_hot = 0.0;
    for (int y = 0; y < 4; ++y) {
        for (int j = 0; j < d; ++j) {
            worst_hot = std::max(worst_hot,
                                 std::fabs(hot.at(y, j) - embed.at(mapped[y], j)));
        }
    }
    c.expect(worst_hot <= kOneHotTol,
             "one-hot row error " + fmt(worst_hot) + " > " + fmt(kOneHotTol));

    const auto uniform = make_learnable_verbalizer<double>(3, vocab, 0.5);
    const Tensor<double> flat = class_embeddings(uniform, embed);
    double worst_flat = 0.0;
    for (int j = 0; j < d; ++j) {
        double mean = 0.0;
        for (int u = 0; u < V; ++u) {
            mean += embed.at(u, j);
        }
        mean /= static_cast<double>(V);
        for (int y = 0; y < 3; ++y) {
            worst_flat = std::max(worst_flat, std::fabs(flat.at(y, j) - mean));
        }
    }
    c.expect(worst_flat <= kUniformTol,
             "uniform row error " + fmt(worst_flat) + " > " + fmt(kUniformTol));
    c.set_info("one-hot " + fmt(worst_hot) + ", uniform " + fmt(worst_flat));
}

// ---------------------------------------------------------------- criterion 8

// One-hot learnable verbalizer vs the fixed map on random logits whose
// argmax lands on a mapped unit.
void c08_argmax_equivalence(Checker& c) {
    const Vocabulary vocab = Vocabulary::with_units(30);
    const int V = vocab.size;
    const FixedVerbalizer fixed = fixed_from_seed(5, vocab, 99);
    auto learn = make_learnable_verbalizer<double>(5, vocab, 0.01);
    for (int y = 0; y < 5; ++y) {
        learn.W.values()[static_cast<std::size_t>(y) * V + fixed.unit_for(y)] = 1.0;
    }

    Rng rng(31337);
    int agreed = 0, tested = 0, drawn = 0;
    while (tested < 1000 && drawn < 100000) {
        ++drawn;
        std::vector<double> z(static_cast<std::size_t>(V));
        for (auto& v : z) {
            v = rng.normal();
        }
        const int top_unit = argmax(z);
        const int want = fixed.label_of(top_unit);
        if (want == FixedVerbalizer::unmapped) {
            continue;  // qualifier: only vectors whose argmax is mapped
        }
        ++tested;
        const Tensor<double> zt = Tensor<double>::from({V}, std::vector<double>(z));
        const Tensor<double> zhat = transform_logits(learn, zt);
        if (predict_label(zhat.values()) == want) {
            ++agreed;
        }
    }
    c.expect(tested == 1000, "only gathered " + std::to_string(tested) +
                                 " qualifying vectors");
    c.expect(agreed == tested, std::to_string(tested - agreed) + " of " +
                                   std::to_string(tested) + " vectors disagreed");
    c.set_info(std::to_string(agreed) + "/" + std::to_string(tested) + " agree");
}

// ---------------------------------------------------------------- criterion 9

// Deduplication algebra on random sequences.
void c09_dedup_algebra(Checker& c) {
    Rng rng(161803);
    int checked = 0;
    for (int t = 0; t < 10000; ++t) {
        const int len = rng.below_int(41);
        const int alphabet = rng.range(1, 5);
        UnitSeq x;
        for (int i = 0; i < len; ++i) {
            x.push_back(rng.below_int(alphabet));
        }
        const UnitSeq d = deduplicate(x);
        const UnitSeq dd = deduplicate(d);
        if (dd != d) {
            c.expect(false, "dedup is not idempotent on case " + std::to_string(t));
            return;
        }
        for (std::size_t i = 1; i < d.size(); ++i) {
            if (d[i] == d[i - 1]) {
                c.expect(false, "adjacent duplicates survive in case " + std::to_string(t));
                return;
            }
        }
        UnitSeq heads;  // independent run-head extraction
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (i == 0 || x[i] != x[i - 1]) {
                heads.push_back(x[i]);
            }
        }
        if (d != heads) {
            c.expect(false, "run structure lost in case " + std::to_string(t));
            return;
        }
        ++checked;
    }
    c.expect(deduplicate({}).empty(), "dedup of empty input is not empty");
    c.set_info(std::to_string(checked) + " sequences");
}

// --------------------------------------------------------------- criterion 10

// Mixed-task batch inference equals solo runs bit-exactly in f64.
void c10_in_batch_tasking(Checker& c) {
    LMConfig cfg;
    cfg.variant = LMVariant::decoder_only;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.d_ffn = 32;
    cfg.n_units = 12;
    cfg.max_positions = 64;
    cfg.dropout = 0.0;
    const UnitLM<double> lm(cfg, 77);

    const PromptSet<double> cls_prompts = init_prompts<double>(cfg, 2, 101);
    const PromptSet<double> seq_prompts = init_prompts<double>(cfg, 3, 102);

    TaskSpec cls;
    cls.name = "batch-cls";
    cls.kind = TaskKind::classification;
    cls.n_labels = 2;
    TaskSpec seq;
    seq.name = "batch-seq";
    seq.kind = TaskKind::sequence;
    seq.n_labels = 3;
    TaskSpec gen;
    gen.name = "batch-gen";
    gen.kind = TaskKind::generation;
    gen.cond_ratio = 0.5;

    const FixedVerbalizer cls_verb = fixed_from_seed(2, lm.vocab(), 3);
    const FixedVerbalizer seq_verb = fixed_from_seed(3, lm.vocab(), 4);
    VerbalizerRef<double> cls_ref;
    cls_ref.fixed = &cls_verb;
    VerbalizerRef<double> seq_ref;
    seq_ref.fixed = &seq_verb;
    VerbalizerRef<double> none_ref;

    Example cls_ex;
    cls_ex.units = {1, 2, 3};
    Example seq_ex;
    seq_ex.units = {4, 5, 6};
    Example gen_ex;
    gen_ex.units = {1, 2, 3, 4};

    std::vector<BatchItem<double>> batch(3);
    batch[0] = {&cls_prompts, cls_ref, &cls, &cls_ex, lm.param_hash()};
    batch[1] = {&seq_prompts, seq_ref, &seq, &seq_ex, lm.param_hash()};
    batch[2] = {&cls_prompts, none_ref, &gen, &gen_ex, lm.param_hash()};

    DecodeConfig dc;
    dc.beam_size = 3;
    dc.max_len = 4;
    dc.length_alpha = 0.5;
    const auto out = in_batch_infer(lm, batch, dc);
    c.expect(out.size() == 3, "batch output size mismatch");

    const TaskPrediction solo[3] = {
        predict_example(lm, cls_prompts, cls_ref, cls, cls_ex, dc),
        predict_example(lm, seq_prompts, seq_ref, seq, seq_ex, dc),
        predict_example(lm, cls_prompts, none_ref, gen, gen_ex, dc),
    };
    for (std::size_t i = 0; i < out.size(); ++i) {
        c.expect(out[i].labels == solo[i].labels,
                 "item " + std::to_string(i) + ": labels differ from the solo run");
        c.expect(out[i].units == solo[i].units,
                 "item " + std::to_string(i) + ": units differ from the solo run");
        c.expect(out[i].logprob == solo[i].logprob,
                 "item " + std::to_string(i) + ": logprob differs (not bit-exact)");
        c.expect(out[i].finished == solo[i].finished,
                 "item " + std::to_string(i) + ": finished flag differs");
    }
    c.set_info("3-task batch bit-exact");
}

// --------------------------------------------------------------- criterion 11

// End-to-end: decoder-only pretraining, freezing, prompt tuning on the
// 8-class task; full-data and 10-shot accuracy floors.
void c11_classification_end_to_end(Checker& c) {
    const auto t0 = std::chrono::steady_clock::now();
    LMConfig cfg;
    cfg.variant = LMVariant::decoder_only;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_model = 64;
    cfg.d_ffn = 128;
    cfg.n_units = 64;
    cfg.max_positions = 128;
    cfg.dropout = 0.1;
    const std::uint64_t master = 2024;

    UnitLM<float> lm(cfg, derive_seed(master, 1));
    const SynthSpec spec = cls8_spec();
    const auto streams = pretrain_streams(spec, lm.vocab(), cfg.variant,
                                          derive_seed(master, 10), 400);
    PretrainConfig pc;
    pc.epochs = 5;
    pc.adam.lr = 3e-3;
    pc.seed = derive_seed(master, 2);
    pretrain_next_token(lm, streams, pc);
    lm.freeze();

    const TaskSpec task = preset_task("cls8", 0.25);
    Dataset full = dataset_from_synth(synth_corpus(spec, derive_seed(master, 3), 200));
    Dataset eval = dataset_from_synth(synth_corpus(spec, derive_seed(master, 4), 60));
    bind_dataset(full, lm.vocab(), task);
    bind_dataset(eval, lm.vocab(), task);
    const auto [train, val] = split_train_val(full, 5);

    const FixedVerbalizer verb = fixed_from_seed(8, lm.vocab(), derive_seed(master, 7));
    VerbalizerRef<float> vref;
    vref.fixed = &verb;

    TuneConfig tc;
    tc.max_steps = 800;
    tc.validate_every = 80;
    tc.patience = 4;
    tc.seed = derive_seed(master, 6);  // Adam stays at lr 5e-3, betas (0.9, 0.98)

    PromptSet<float> prompts = init_prompts<float>(cfg, 5, derive_seed(master, 5));
    prompt_tune(lm, prompts, vref, task, train, val, tc);

    DecodeConfig dc;
    dc.beam_size = 5;
    dc.max_len = 0;
    const double acc_full =
        eval_metric(evaluate_task(lm, prompts, vref, task, eval, dc), "accuracy");
    c.expect(acc_full >= kFullAccuracy,
             "full-data accuracy " + fmt(acc_full) + " < " + fmt(kFullAccuracy));

    Dataset few = fewshot_subsample(full, 10, derive_seed(master, 9));
    const auto [ftrain, fval] = split_train_val(few, 5);
    PromptSet<float> fprompts = init_prompts<float>(cfg, 5, derive_seed(master, 15));
    prompt_tune(lm, fprompts, vref, task, ftrain, fval, tc);
    const double acc_few =
        eval_metric(evaluate_task(lm, fprompts, vref, task, eval, dc), "accuracy");
    c.expect(acc_few >= kFewshotAccuracy,
             "10-shot accuracy " + fmt(acc_few) + " < " + fmt(kFewshotAccuracy));

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs <= 900.0, "run took " + fmt(secs) + "s, over the 15-minute budget");
    c.set_info("full " + fmt(acc_full) + ", 10-shot " + fmt(acc_few) + ", " +
               fmt(secs) + "s");
}

// --------------------------------------------------------------- criterion 12

// End-to-end transcription on the encoder-decoder backbone; the learnable
// verbalizer must clear the CER ceiling and beat the fixed one.
void c12_sequence_end_to_end(Checker& c) {
    const auto t0 = std::chrono::steady_clock::now();
    LMConfig cfg;
    cfg.variant = LMVariant::encoder_decoder;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_model = 64;
    cfg.d_ffn = 128;
    cfg.n_units = 40;
    cfg.max_positions = 64;
    cfg.dropout = 0.1;
    const std::uint64_t master = 777;

    UnitLM<float> lm(cfg, derive_seed(master, 1));
    const SynthSpec spec = trans12_spec();
    const auto streams = pretrain_streams(spec, lm.vocab(), cfg.variant,
                                          derive_seed(master, 10), 400);
    PretrainConfig pc;
    pc.epochs = 6;
    pc.adam.lr = 3e-3;
    pc.seed = derive_seed(master, 2);
    pretrain_denoise(lm, streams, pc);
    lm.freeze();

    const TaskSpec task = preset_task("trans12", 0.25);
    Dataset full = dataset_from_synth(synth_corpus(spec, derive_seed(master, 3), 200));
    Dataset eval = dataset_from_synth(synth_corpus(spec, derive_seed(master, 4), 50));
    bind_dataset(full, lm.vocab(), task);
    bind_dataset(eval, lm.vocab(), task);
    const auto [train, val] = split_train_val(full, 5);

    TuneConfig tc;
    tc.max_steps = 1000;
    tc.validate_every = 100;
    tc.patience = 5;
    tc.seed = derive_seed(master, 6);
    DecodeConfig dc;
    dc.beam_size = 5;
    dc.max_len = 0;

    auto learn = make_learnable_verbalizer<float>(12, lm.vocab(), 0.01);
    VerbalizerRef<float> lref;
    lref.learnable = &learn;
    PromptSet<float> lp = init_prompts<float>(cfg, 5, derive_seed(master, 5));
    prompt_tune(lm, lp, lref, task, train, val, tc);
    const double cer_learn =
        eval_metric(evaluate_task(lm, lp, lref, task, eval, dc), "cer");
    c.expect(cer_learn <= kCerCeiling,
             "learnable-verbalizer CER " + fmt(cer_learn) + " > " + fmt(kCerCeiling));

    const FixedVerbalizer fixed = fixed_from_seed(12, lm.vocab(), derive_seed(master, 7));
    VerbalizerRef<float> fref;
    fref.fixed = &fixed;
    PromptSet<float> fp = init_prompts<float>(cfg, 5, derive_seed(master, 5));
    prompt_tune(lm, fp, fref, task, train, val, tc);
    const double cer_fixed =
        eval_metric(evaluate_task(lm, fp, fref, task, eval, dc), "cer");
    c.expect(cer_learn < cer_fixed,
             "learnable CER " + fmt(cer_learn) + " does not beat fixed CER " +
                 fmt(cer_fixed));

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs <= 1200.0, "run took " + fmt(secs) + "s, over the 20-minute budget");
    c.set_info("learnable " + fmt(cer_learn) + " vs fixed " + fmt(cer_fixed) + ", " +
               fmt(secs) + "s");
}

// --------------------------------------------------------------- criterion 13

// Interpretability: each class's heaviest verbalizer unit should carry the
// class's generating latent symbol.
void c13_verbalizer_interpretability(Checker& c) {
    LMConfig cfg;
    cfg.variant = LMVariant::encoder_decoder;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_model = 64;
    cfg.d_ffn = 128;
    cfg.n_units = 40;
    cfg.max_positions = 64;
    cfg.dropout = 0.1;
    const std::uint64_t master = 515;

    UnitLM<float> lm(cfg, derive_seed(master, 1));
    const SynthSpec spec = trans12_spec();
    const auto streams = pretrain_streams(spec, lm.vocab(), cfg.variant,
                                          derive_seed(master, 10), 400);
    PretrainConfig pc;
    pc.epochs = 5;
    pc.adam.lr = 3e-3;
    pc.seed = derive_seed(master, 2);
    pretrain_denoise(lm, streams, pc);
    lm.freeze();

    const TaskSpec task = preset_task("trans12", 0.25);
    Dataset full = dataset_from_synth(synth_corpus(spec, derive_seed(master, 3), 200));
    bind_dataset(full, lm.vocab(), task);
    const auto [train, val] = split_train_val(full, 5);

    auto learn = make_learnable_verbalizer<float>(12, lm.vocab(), 0.01);
    VerbalizerRef<float> lref;
    lref.learnable = &learn;
    PromptSet<float> prompts = init_prompts<float>(cfg, 5, derive_seed(master, 5));
    TuneConfig tc;
    tc.max_steps = 900;
    tc.validate_every = 100;
    tc.patience = 5;
    tc.seed = derive_seed(master, 6);
    prompt_tune(lm, prompts, lref, task, train, val, tc);

    // The transcription labels are the latent symbols themselves, so the
    // annotation oracle must agree with the label id.
    const auto annotations = annotate_units(train, cfg.n_units);
    const auto rows = export_weights(learn, annotations, 1);
    int hits = 0;
    std::ostringstream misses;
    for (const auto& row : rows) {
        if (row.rank != 0) {
            continue;
        }
        if (row.symbol == row.label) {
            ++hits;
        } else {
            misses << " y" << row.label << "->u" << row.unit << "(s" << row.symbol << ")";
        }
    }
    const double rate = static_cast<double>(hits) / 12.0;
    c.expect(rate >= kTopUnitHitRate, "top-1 unit carries the class symbol for only " +
                                          std::to_string(hits) + "/12 classes:" +
                                          misses.str());
    c.set_info(std::to_string(hits) + "/12 classes aligned");
}

// --------------------------------------------------------------- criterion 14

// Continuation framing: exact split lengths, and tuned prompts must raise
// the likelihood of held-out continuations over an untuned control.
void c14_continuation(Checker& c) {
    const SynthSpec spec = cont_spec();
    const auto probe = synth_corpus(spec, 31337, 150);
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const UnitSeq& u = probe[i].units;
        for (const double r : {0.25, 0.5, 0.75}) {
            const auto [seed_part, target] = split_continuation(u, r);
            const std::size_t want = static_cast<std::size_t>(
                std::ceil(r * static_cast<double>(u.size())));
            if (seed_part.size() != want) {
                c.expect(false, "utterance " + std::to_string(i) + " r " + fmt(r) +
                                    ": seed length " + std::to_string(seed_part.size()) +
                                    " != " + std::to_string(want));
                return;
            }
            UnitSeq glued = seed_part;
            glued.insert(glued.end(), target.begin(), target.end());
            if (glued != u) {
                c.expect(false, "split does not glue back on utterance " +
                                    std::to_string(i));
                return;
            }
        }
    }

    LMConfig cfg;
    cfg.variant = LMVariant::decoder_only;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_model = 64;
    cfg.d_ffn = 128;
    cfg.n_units = 40;
    cfg.max_positions = 128;
    cfg.dropout = 0.1;
    const std::uint64_t master = 606;

    UnitLM<float> lm(cfg, derive_seed(master, 1));
    const auto streams = pretrain_streams(spec, lm.vocab(), cfg.variant,
                                          derive_seed(master, 10), 300);
    PretrainConfig pc;
    pc.epochs = 5;
    pc.adam.lr = 3e-3;
    pc.seed = derive_seed(master, 2);
    pretrain_next_token(lm, streams, pc);
    lm.freeze();

    const TaskSpec task = preset_task("cont", 0.5);
    Dataset full = dataset_from_synth(synth_corpus(spec, derive_seed(master, 3), 150));
    Dataset eval = dataset_from_synth(synth_corpus(spec, derive_seed(master, 4), 40));
    bind_dataset(full, lm.vocab(), task);
    bind_dataset(eval, lm.vocab(), task);
    const auto [train, val] = split_train_val(full, 5);

    VerbalizerRef<float> none;
    PromptSet<float> tuned = init_prompts<float>(cfg, 5, derive_seed(master, 5));
    TuneConfig tc;
    tc.max_steps = 600;
    tc.validate_every = 60;
    tc.patience = 5;
    tc.seed = derive_seed(master, 6);
    prompt_tune(lm, tuned, none, task, train, val, tc);

    const PromptSet<float> control = init_prompts<float>(cfg, 5, derive_seed(master, 21));

    auto mean_target_logprob = [&](const PromptSet<float>& p) {
        double total = 0.0;
        for (const auto& ex : eval.examples) {
            const auto [seed_part, target] = split_continuation(ex.units, task.cond_ratio);
            const UnitScorer<float> scorer(lm, &p, seed_part);
            total += forced_logprob(scorer, target, true);
        }
        return total / static_cast<double>(eval.size());
    };
    const double lp_tuned = mean_target_logprob(tuned);
    const double lp_control = mean_target_logprob(control);
    c.expect(lp_tuned > lp_control,
             "tuned target logprob " + fmt(lp_tuned) + " does not beat control " +
                 fmt(lp_control));
    c.set_info("tuned " + fmt(lp_tuned) + " vs control " + fmt(lp_control) + " over " +
               std::to_string(probe.size()) + " split-checked utterances");
}

// --------------------------------------------------------------- criterion 15

// Metric oracles: DP edit distance, identity BLEU, repetition scores.
int lev_oracle(const UnitSeq& a, const UnitSeq& b, std::size_t i, std::size_t j,
               std::map<std::pair<std::size_t, std::size_t>, int>& memo) {
    if (i == a.size()) {
        return static_cast<int>(b.size() - j);
    }
    if (j == b.size()) {
        return static_cast<int>(a.size() - i);
    }
    const auto key = std::make_pair(i, j);
    const auto it = memo.find(key);
    if (it != memo.end()) {
        return it->second;
    }
    int best = lev_oracle(a, b, i + 1, j + 1, memo) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, lev_oracle(a, b, i + 1, j, memo) + 1);
    best = std::min(best, lev_oracle(a, b, i, j + 1, memo) + 1);
    memo[key] = best;
    return best;
}

void c15_metric_oracles(Checker& c) {
    Rng rng(141421);
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        UnitSeq a, b;
        const int la = rng.below_int(13), lb = rng.below_int(13);
        for (int i = 0; i < la; ++i) {
            a.push_back(rng.below_int(4));
        }
        for (int i = 0; i < lb; ++i) {
            b.push_back(rng.below_int(4));
        }
        std::map<std::pair<std::size_t, std::size_t>, int> memo;
        if (levenshtein(a, b) != lev_oracle(a, b, 0, 0, memo)) {
            ++mismatches;
        }
    }
    c.expect(mismatches == 0,
             std::to_string(mismatches) + "/1000 edit distances disagree with the oracle");

    std::vector<std::vector<int>> corpus;
    for (int i = 0; i < 5; ++i) {
        std::vector<int> u;
        const int len = rng.range(5, 15);
        for (int j = 0; j < len; ++j) {
            u.push_back(rng.below_int(6));
        }
        corpus.push_back(std::move(u));
    }
    const double self_bleu = bleu(corpus, corpus);
    c.expect(close(self_bleu, 100.0, kCloseTol),
             "bleu(x, x) = " + fmt(self_bleu) + " != 100");

    c.expect(auto_bleu({1, 2, 3, 4}, 1) == 0.0, "distinct tokens should score 0");
    c.expect(auto_bleu({9, 9, 9, 9}, 1) == 1.0, "identical tokens should score 1");
    c.expect(close(auto_bleu({7, 8, 7, 8}, 2), 2.0 / 3.0, kCloseTol),
             "[a,b,a,b] bigram repetition != 2/3");
    c.set_info("1000 DP cases, self-BLEU " + fmt(self_bleu));
}

// ------------------------------------------------------------------- driver

struct Criterion {
    int id;
    const char* title;
    void (*run)(Checker&);
};

const Criterion kCriteria[] = {
    {1, "data-size accounting matches the published table", c01_data_sizes},
    {2, "learnable verbalizer stays under the 30k parameter budget", c02_verbalizer_budget},
    {3, "prompt parameter counts match the published 4.5M / 2.6M", c03_prompt_param_counts},
    {4, "gradients match central finite differences", c04_gradient_oracle},
    {5, "frozen backbone is bit-stable across 500 tuning steps", c05_frozen_invariance},
    {6, "beam search equals exhaustive enumeration on tiny models", c06_beam_oracle},
    {7, "class embeddings hit the one-hot and uniform limits", c07_class_embedding_limits},
    {8, "one-hot learnable verbalizer predicts like the fixed map", c08_argmax_equivalence},
    {9, "deduplication algebra holds on 10k random sequences", c09_dedup_algebra},
    {10, "mixed-task batches equal solo runs bit-exactly", c10_in_batch_tasking},
    {11, "end-to-end classification clears 0.90 full / 0.70 ten-shot",
     c11_classification_end_to_end},
    {12, "end-to-end transcription clears CER 0.10 and beats the fixed map",
     c12_sequence_end_to_end},
    {13, "top verbalizer units carry their class's latent symbol",
     c13_verbalizer_interpretability},
    {14, "continuation splits are exact and tuning lifts target likelihood",
     c14_continuation},
    {15, "metric implementations match their oracles", c15_metric_oracles},
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::cerr << "usage: " << argv[0] << " [--only N]\n";
            return 2;
        }
    }
    if (only < 0 || only > 15) {
        std::cerr << "--only takes a criterion number between 1 and 15\n";
        return 2;
    }

    int failures = 0;
    for (const auto& criterion : kCriteria) {
        if (only != 0 && criterion.id != only) {
            continue;
        }
        Checker check;
        try {
            criterion.run(check);
        } catch (const std::exception& e) {
            check.ok = false;
            check.notes.push_back(std::string("exception: ") + e.what());
        }
        std::ostringstream line;
        line << (check.ok ? "[PASS]" : "[FAIL]") << ' ' << (criterion.id < 10 ? "0" : "")
             << criterion.id << ' ' << criterion.title;
        if (check.ok && !check.info.empty()) {
            line << " (" << check.info << ")";
        }
        std::cout << line.str() << '\n';
        for (const auto& note : check.notes) {
            std::cout << "       - " << note << '\n';
        }
        if (!check.ok) {
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}
