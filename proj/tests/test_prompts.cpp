#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "uprompt/prompts.hpp"

using namespace uprompt;

namespace {

LMConfig tiny_decoder() {
    LMConfig cfg;
    cfg.variant = LMVariant::decoder_only;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.d_ffn = 32;
    cfg.n_units = 8;
    cfg.max_positions = 32;
    cfg.dropout = 0.0;
    return cfg;
}

LMConfig tiny_encdec() {
    LMConfig cfg = tiny_decoder();
    cfg.variant = LMVariant::encoder_decoder;
    return cfg;
}

// Two linearly-separable unit patterns, enough signal for a frozen random
// backbone to pick up within a few dozen tuning steps.
Dataset two_class_data(int per_class) {
    Dataset ds;
    for (int i = 0; i < per_class; ++i) {
        Example a;
        a.units = {1, 1, static_cast<int>(1 + i % 2)};
        a.class_id = 0;
        ds.examples.push_back(a);
        Example b;
        b.units = {2, 2, static_cast<int>(2 + i % 2)};
        b.class_id = 1;
        ds.examples.push_back(b);
    }
    return ds;
}

TaskSpec cls_task(int n_labels) {
    TaskSpec task;
    task.kind = TaskKind::classification;
    task.name = "cls";
    task.n_labels = n_labels;
    return task;
}

FixedVerbalizer two_label_verb() {
    FixedVerbalizer verb;
    verb.label_to_unit = {3, 4};
    verb.unit_to_label[3] = 0;
    verb.unit_to_label[4] = 1;
    return verb;
}

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]));
    }
    return worst;
}

}  // namespace

TEST_CASE("init_prompts: structure, determinism and the l = 0 degenerate case") {
    const LMConfig dec = tiny_decoder();
    const LMConfig ed = tiny_encdec();

    SUBCASE("length zero means nothing trainable") {
        auto p = init_prompts<float>(dec, 0, 7);
        CHECK(p.l == 0);
        CHECK(p.stacks.size() == 1);
        CHECK(p.input_len() == 0);
        CHECK(p.param_count() == 0);
        CHECK(p.trainable_tensors().empty());
        CHECK(p.encoder_prompts() == nullptr);
        CHECK(p.decoder_prompts() == &p.stacks.back());
    }

    SUBCASE("stack count follows the variant") {
        auto pd = init_prompts<float>(dec, 3, 7);
        auto pe = init_prompts<float>(ed, 3, 7);
        CHECK(pd.stacks.size() == 1);
        CHECK(pe.stacks.size() == 2);
        CHECK(pe.encoder_prompts() == &pe.stacks[0]);
        CHECK(pe.decoder_prompts() == &pe.stacks[1]);
        for (const auto& stack : pe.stacks) {
            CHECK(stack.input.rows() == 3);
            CHECK(stack.input.cols() == ed.d_model);
            CHECK(stack.pk.size() == static_cast<std::size_t>(ed.n_layers));
            CHECK(stack.pv.size() == static_cast<std::size_t>(ed.n_layers));
        }
    }

    SUBCASE("same seed bit-identical, different seed different") {
        auto a = init_prompts<float>(dec, 4, 11);
        auto b = init_prompts<float>(dec, 4, 11);
        auto c = init_prompts<float>(dec, 4, 12);
        CHECK(a.stacks[0].input.values() == b.stacks[0].input.values());
        CHECK(a.stacks[0].pk[1].values() == b.stacks[0].pk[1].values());
        CHECK(a.stacks[0].input.values() != c.stacks[0].input.values());
    }

    SUBCASE("entries look like normal(0, 0.02)") {
        LMConfig wide = dec;
        wide.d_model = 64;
        wide.d_ffn = 128;
        wide.max_positions = 64;
        auto p = init_prompts<double>(wide, 40, 3);
        const auto& vals = p.stacks[0].input.values();  // 40 x 64 = 2560 draws
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= static_cast<double>(vals.size());
        CHECK(std::abs(mean) < 0.005);
        CHECK(std::sqrt(var) == doctest::Approx(0.02).epsilon(0.15));
    }

    SUBCASE("every tensor comes back trainable") {
        auto p = init_prompts<float>(dec, 2, 5);
        for (const auto& t : p.trainable_tensors()) {
            CHECK(t.trainable());
        }
    }

    SUBCASE("negative length rejected") {
        CHECK_THROWS_AS(init_prompts<float>(dec, -1, 0), ConfigError);
    }
}

TEST_CASE("trainable parameter accounting matches the closed form") {
    LMConfig dec = tiny_decoder();
    dec.d_model = 64;
    dec.d_ffn = 128;

    SUBCASE("decoder-only, l = 5, 2 layers, d = 64 gives 1600") {
        auto p = init_prompts<float>(dec, 5, 1);
        CHECK(prompt_param_formula(dec, 5) == 1600);
        CHECK(p.param_count() == 1600);
    }

    SUBCASE("encoder-decoder doubles both terms") {
        LMConfig ed = tiny_encdec();
        auto p = init_prompts<float>(ed, 3, 1);
        const long want = 2L * 3 * ed.d_model + 2L * ed.n_layers * 2 * 3 * ed.d_model;
        CHECK(prompt_param_formula(ed, 3) == want);
        CHECK(p.param_count() == want);
    }

    SUBCASE("ablation toggles subtract their share") {
        auto p = init_prompts<float>(dec, 5, 1);
        p.use_input = false;
        CHECK(p.param_count() == prompt_param_formula(dec, 5) - 1L * 5 * dec.d_model);
        p.use_input = true;
        p.use_deep = false;
        CHECK(p.param_count() == 1L * 5 * dec.d_model);
        CHECK(p.input_len() == 5);
        p.use_input = false;
        CHECK(p.input_len() == 0);
    }

    SUBCASE("count_trainable adds the verbalizer weights when present") {
        auto p = init_prompts<float>(tiny_decoder(), 2, 1);
        Vocabulary vocab = Vocabulary::with_units(8);
        auto verb = make_learnable_verbalizer<float>(3, vocab);
        TrainableCount with = count_trainable(p, &verb);
        TrainableCount without = count_trainable<float>(p, nullptr);
        CHECK(without.prompts == p.param_count());
        CHECK(without.verbalizer == 0);
        CHECK(without.total == without.prompts);
        CHECK(with.prompts == p.param_count());
        CHECK(with.verbalizer == 3L * vocab.size);
        CHECK(with.total == with.prompts + with.verbalizer);
    }
}

TEST_CASE("apply_input_prompts prepends rows") {
    Rng rng(4);
    Tensor<double> h = Tensor<double>::randn({3, 5}, rng, 1.0);

    SUBCASE("zero-length prompt is the identity") {
        Tensor<double> empty = Tensor<double>::zeros({0, 5});
        Tensor<double> out = apply_input_prompts(h, empty);
        CHECK(out.rows() == 3);
        CHECK(out.values() == h.values());
    }

    SUBCASE("prompt rows come first") {
        Tensor<double> p = Tensor<double>::randn({2, 5}, rng, 1.0);
        Tensor<double> out = apply_input_prompts(h, p);
        REQUIRE(out.rows() == 5);
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 5; ++c) {
                CHECK(out.at(r, c) == p.at(r, c));
            }
        }
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 5; ++c) {
                CHECK(out.at(2 + r, c) == h.at(r, c));
            }
        }
    }

    SUBCASE("width mismatch throws") {
        Tensor<double> p = Tensor<double>::zeros({2, 4});
        CHECK_THROWS_AS(apply_input_prompts(h, p), ShapeError);
    }
}

TEST_CASE("apply_deep_prompts prepends before the projections") {
    // Identity projections make the result directly readable.
    Tensor<double> eye = Tensor<double>::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye.values()[i * 3 + i] = 1.0;
    Tensor<double> h = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor<double> pk = Tensor<double>::from({1, 3}, {7, 8, 9});
    Tensor<double> pv = Tensor<double>::from({1, 3}, {-1, -2, -3});

    SUBCASE("keys and values carry the prompt rows on top") {
        auto [k, v] = apply_deep_prompts(h, pk, pv, eye, eye);
        REQUIRE(k.rows() == 3);
        REQUIRE(v.rows() == 3);
        CHECK(k.at(0, 0) == 7.0);
        CHECK(k.at(0, 2) == 9.0);
        CHECK(k.at(1, 0) == 1.0);
        CHECK(k.at(2, 2) == 6.0);
        CHECK(v.at(0, 0) == -1.0);
        CHECK(v.at(1, 1) == 2.0);
        CHECK(v.at(2, 1) == 5.0);
    }

    SUBCASE("zero-length prompts reduce to plain projections") {
        Tensor<double> none = Tensor<double>::zeros({0, 3});
        auto [k, v] = apply_deep_prompts(h, none, none, eye, eye);
        CHECK(k.rows() == 2);
        CHECK(k.values() == h.values());
        CHECK(v.values() == h.values());
    }

    SUBCASE("mismatched prompt lengths throw") {
        Tensor<double> short_pv = Tensor<double>::zeros({0, 3});
        CHECK_THROWS_AS(apply_deep_prompts(h, pk, short_pv, eye, eye), ShapeError);
    }
}

TEST_CASE("prompt mechanisms and the forward pass") {
    const LMConfig cfg = tiny_decoder();
    UnitLM<double> lm(cfg, 99);
    lm.freeze();
    const UnitSeq tokens = {1, 2, 3, 4, 5, 1};

    SUBCASE("deep prompts change logits without changing length") {
        Tensor<double> vanilla = lm.forward_decoder_only(tokens, nullptr);
        auto p = init_prompts<double>(cfg, 4, 21);
        p.use_input = false;
        Tensor<double> deep = lm.forward_decoder_only(tokens, &p);
        REQUIRE(deep.rows() == vanilla.rows());
        double diff = 0.0;
        for (std::size_t i = 0; i < deep.values().size(); ++i) {
            diff = std::max(diff, std::abs(deep.values()[i] - vanilla.values()[i]));
        }
        CHECK(diff > 1e-6);
    }

    SUBCASE("input prompts extend the output by l rows") {
        auto p = init_prompts<double>(cfg, 4, 21);
        Tensor<double> out = lm.forward_decoder_only(tokens, &p);
        CHECK(out.rows() == static_cast<int>(tokens.size()) + 4);
    }

    SUBCASE("an l = 0 prompt set is a no-op") {
        auto p = init_prompts<double>(cfg, 0, 21);
        Tensor<double> with = lm.forward_decoder_only(tokens, &p);
        Tensor<double> without = lm.forward_decoder_only(tokens, nullptr);
        CHECK(with.values() == without.values());
    }

    SUBCASE("gradient reaches every prompt tensor") {
        auto p = init_prompts<double>(cfg, 3, 21);
        Tensor<double> out = lm.forward_decoder_only(tokens, &p);
        Tensor<double> loss = mean(out);
        loss.backward();
        auto tensors = p.trainable_tensors();
        REQUIRE(tensors.size() == 1 + 2 * static_cast<std::size_t>(cfg.n_layers));
        for (auto& t : tensors) {
            REQUIRE(!t.grad().empty());
            double peak = 0.0;
            for (double g : t.grad()) peak = std::max(peak, std::abs(g));
            CHECK(peak > 0.0);
        }
    }
}

TEST_CASE("feedback_states builds label rows from class embeddings") {
    const LMConfig cfg = tiny_decoder();
    UnitLM<double> lm(cfg, 5);
    const Vocabulary& vocab = lm.vocab();
    auto verb = make_learnable_verbalizer<double>(2, vocab);

    SUBCASE("no labels means plain embedded units") {
        Tensor<double> out = feedback_states(lm, verb, {1, 2}, {});
        Tensor<double> plain = lm.embed_units({1, 2});
        CHECK(out.values() == plain.values());
    }

    SUBCASE("a near-one-hot class row lands on the mapped unit embedding") {
        const int unit = 6;
        verb.W.values()[1 * lm.vocab().size + unit] = 1000.0;  // tau = 0.01 makes this effectively one-hot
        Tensor<double> out = feedback_states(lm, verb, {1, 2}, {1});
        REQUIRE(out.rows() == 3);
        Tensor<double> cls = lm.embed_units({unit});  // embedding + position 0
        for (int c = 0; c < cfg.d_model; ++c) {
            const double want =
                cls.at(0, c) - lm.positions().at(0, c) + lm.positions().at(2, c);
            CHECK(out.at(2, c) == doctest::Approx(want).epsilon(1e-9));
        }
    }

    SUBCASE("label outside the verbalizer range throws") {
        CHECK_THROWS_AS(feedback_states(lm, verb, {1}, {2}), IndexError);
        CHECK_THROWS_AS(feedback_states(lm, verb, {1}, {-1}), IndexError);
    }
}

TEST_CASE("example_loss framings") {
    const LMConfig cfg = tiny_decoder();
    UnitLM<double> lm(cfg, 17);
    lm.freeze();
    auto prompts = init_prompts<double>(cfg, 2, 31);
    const FixedVerbalizer fixed = two_label_verb();
    VerbalizerRef<double> fixed_ref{&fixed, nullptr};
    TaskSpec task = cls_task(2);

    Example ex;
    ex.units = {1, 2, 1};
    ex.class_id = 1;

    SUBCASE("classification with a fixed verbalizer matches the manual framing") {
        Tensor<double> loss = example_loss(lm, prompts, fixed_ref, task, ex);
        // Rebuild by hand: decoder input [units, <sep>, u_y], score the rows
        // that predict u_y and then <eos>.
        const Vocabulary& vocab = lm.vocab();
        UnitSeq dec_in = ex.units;
        dec_in.push_back(vocab.sep);
        dec_in.push_back(fixed.unit_for(ex.class_id));
        Tensor<double> logits = lm.forward_decoder_only(dec_in, &prompts);
        std::vector<int> targets(static_cast<std::size_t>(logits.rows()), -1);
        const int base = prompts.input_len() + static_cast<int>(ex.units.size());
        targets[static_cast<std::size_t>(base)] = fixed.unit_for(ex.class_id);
        targets[static_cast<std::size_t>(base) + 1] = vocab.eos;
        Tensor<double> manual = cross_entropy_rows(logits, targets);
        CHECK(loss.item() == doctest::Approx(manual.item()).epsilon(1e-12));
    }

    SUBCASE("all framings are finite for both variants") {
        auto verb = make_learnable_verbalizer<double>(2, lm.vocab());
        VerbalizerRef<double> learn_ref{nullptr, &verb};
        CHECK(std::isfinite(example_loss(lm, prompts, learn_ref, task, ex).item()));

        TaskSpec seq;
        seq.kind = TaskKind::sequence;
        seq.name = "seq";
        seq.n_labels = 2;
        Example sx = ex;
        sx.labels = {0, 1, 1};
        CHECK(std::isfinite(example_loss(lm, prompts, fixed_ref, seq, sx).item()));
        CHECK(std::isfinite(example_loss(lm, prompts, learn_ref, seq, sx).item()));

        TaskSpec gen;
        gen.kind = TaskKind::generation;
        gen.name = "gen";
        gen.cond_ratio = 0.5;
        VerbalizerRef<double> none{nullptr, nullptr};
        Example gx;
        gx.units = {1, 2, 3, 4};
        CHECK(std::isfinite(example_loss(lm, prompts, none, gen, gx).item()));

        const LMConfig ecfg = tiny_encdec();
        UnitLM<double> ed(ecfg, 17);
        ed.freeze();
        auto eprompts = init_prompts<double>(ecfg, 2, 31);
        CHECK(std::isfinite(example_loss(ed, eprompts, fixed_ref, task, ex).item()));
        CHECK(std::isfinite(example_loss(ed, eprompts, learn_ref, task, ex).item()));
        CHECK(std::isfinite(example_loss(ed, eprompts, none, gen, gx).item()));
    }

    SUBCASE("verbalizer arity is enforced per task kind") {
        auto verb = make_learnable_verbalizer<double>(2, lm.vocab());
        VerbalizerRef<double> both{&fixed, &verb};
        VerbalizerRef<double> none{nullptr, nullptr};
        CHECK_THROWS_AS(example_loss(lm, prompts, both, task, ex), UsageError);
        CHECK_THROWS_AS(example_loss(lm, prompts, none, task, ex), UsageError);

        TaskSpec gen;
        gen.kind = TaskKind::generation;
        gen.name = "gen";
        gen.cond_ratio = 0.5;
        CHECK_THROWS_AS(example_loss(lm, prompts, fixed_ref, gen, ex), UsageError);
    }

    SUBCASE("bad examples are rejected") {
        Example empty;
        CHECK_THROWS_AS(example_loss(lm, prompts, fixed_ref, task, empty), DataError);
        Example bad = ex;
        bad.class_id = 5;
        CHECK_THROWS_AS(example_loss(lm, prompts, fixed_ref, task, bad), DataError);
        TaskSpec seq;
        seq.kind = TaskKind::sequence;
        seq.name = "seq";
        seq.n_labels = 2;
        Example nolab = ex;
        nolab.labels.clear();
        CHECK_THROWS_AS(example_loss(lm, prompts, fixed_ref, seq, nolab), DataError);
    }
}

TEST_CASE("example_loss gradients agree with finite differences") {
    LMConfig cfg = tiny_decoder();
    cfg.n_layers = 1;
    UnitLM<double> lm(cfg, 7);
    lm.freeze();
    auto prompts = init_prompts<double>(cfg, 2, 13);
    const FixedVerbalizer fixed = two_label_verb();
    VerbalizerRef<double> ref{&fixed, nullptr};
    TaskSpec task = cls_task(2);
    Example ex;
    ex.units = {1, 2, 3};
    ex.class_id = 0;

    auto params = prompts.trainable_tensors();
    auto report = uprompt::testing::gradcheck(params, [&]() {
        return example_loss(lm, prompts, ref, task, ex);
    });
    CHECK(report.checked > 0);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("prompt_tune") {
    const LMConfig cfg = tiny_decoder();
    const TaskSpec task = cls_task(2);
    const FixedVerbalizer fixed = two_label_verb();
    const Dataset train = two_class_data(8);
    const Dataset val = two_class_data(2);

    SUBCASE("misuse and bad configs are rejected up front") {
        UnitLM<float> hot(cfg, 1);  // not frozen
        auto p = init_prompts<float>(cfg, 2, 2);
        VerbalizerRef<float> ref{&fixed, nullptr};
        TuneConfig tc;
        CHECK_THROWS_AS(prompt_tune(hot, p, ref, task, train, val, tc), UsageError);

        UnitLM<float> lm(cfg, 1);
        lm.freeze();
        Dataset empty;
        CHECK_THROWS_AS(prompt_tune(lm, p, ref, task, empty, val, tc), DataError);
        CHECK_THROWS_AS(prompt_tune(lm, p, ref, task, train, empty, tc), DataError);

        TuneConfig zero;
        zero.max_steps = 0;
        CHECK_THROWS_AS(prompt_tune(lm, p, ref, task, train, val, zero), ConfigError);

        auto none = init_prompts<float>(cfg, 0, 2);
        CHECK_THROWS_AS(prompt_tune(lm, none, ref, task, train, val, tc), ConfigError);
    }

    SUBCASE("tuning improves validation loss, moves every tensor, leaves the backbone alone") {
        UnitLM<float> lm(cfg, 1);
        lm.freeze();
        const std::uint64_t hash = lm.param_hash();
        auto p = init_prompts<float>(cfg, 3, 2);
        auto before = p.clone_values();
        VerbalizerRef<float> ref{&fixed, nullptr};
        TuneConfig tc;
        tc.max_steps = 60;
        tc.validate_every = 10;
        tc.patience = 10;
        tc.seed = 5;
        TuneResult res = prompt_tune(lm, p, ref, task, train, val, tc);
        REQUIRE(res.steps_run == 60);
        REQUIRE(res.val_losses.size() == 6);
        CHECK(res.train_losses.size() == 60);
        CHECK(res.best_val_loss == *std::min_element(res.val_losses.begin(), res.val_losses.end()));
        CHECK(res.best_val_loss < res.val_losses.front());
        CHECK(!res.early_stopped);
        CHECK(lm.param_hash() == hash);
        for (std::size_t s = 0; s < p.stacks.size(); ++s) {
            CHECK(max_abs_diff(p.stacks[s].input.values(), before.stacks[s].input.values()) > 0.0);
            for (std::size_t i = 0; i < p.stacks[s].pk.size(); ++i) {
                CHECK(max_abs_diff(p.stacks[s].pk[i].values(), before.stacks[s].pk[i].values()) >
                      0.0);
                CHECK(max_abs_diff(p.stacks[s].pv[i].values(), before.stacks[s].pv[i].values()) >
                      0.0);
            }
        }
    }

    SUBCASE("bit-identical reruns under the same seeds") {
        auto run = [&]() {
            UnitLM<float> lm(cfg, 1);
            lm.freeze();
            auto p = init_prompts<float>(cfg, 2, 2);
            VerbalizerRef<float> ref{&fixed, nullptr};
            TuneConfig tc;
            tc.max_steps = 25;
            tc.validate_every = 5;
            tc.patience = 10;
            tc.seed = 9;
            TuneResult res = prompt_tune(lm, p, ref, task, train, val, tc);
            return std::make_pair(res, p.stacks[0].input.values());
        };
        auto [ra, va] = run();
        auto [rb, vb] = run();
        CHECK(ra.train_losses == rb.train_losses);
        CHECK(ra.val_losses == rb.val_losses);
        CHECK(va == vb);
    }

    SUBCASE("zero learning rate stalls validation and triggers early stopping") {
        UnitLM<float> lm(cfg, 1);
        lm.freeze();
        auto p = init_prompts<float>(cfg, 2, 2);
        auto before = p.clone_values();
        VerbalizerRef<float> ref{&fixed, nullptr};
        TuneConfig tc;
        tc.max_steps = 50;
        tc.adam.lr = 0.0;
        tc.validate_every = 1;
        tc.patience = 2;
        tc.seed = 3;
        TuneResult res = prompt_tune(lm, p, ref, task, train, val, tc);
        CHECK(res.early_stopped);
        CHECK(res.steps_run == 3);  // improve at 1, stale at 2 and 3
        CHECK(res.best_step == 1);
        CHECK(res.val_losses.size() == 3);
        CHECK(res.val_losses[0] == res.val_losses[1]);
        CHECK(p.stacks[0].input.values() == before.stacks[0].input.values());
    }

    SUBCASE("the returned prompts are the best-validation snapshot") {
        auto tuned_with_budget = [&](int max_steps) {
            UnitLM<float> lm(cfg, 1);
            lm.freeze();
            auto p = init_prompts<float>(cfg, 2, 2);
            VerbalizerRef<float> ref{&fixed, nullptr};
            TuneConfig tc;
            tc.max_steps = max_steps;
            tc.validate_every = 10;
            tc.patience = 50;
            tc.seed = 7;
            TuneResult res = prompt_tune(lm, p, ref, task, train, val, tc);
            return std::make_pair(res, p);
        };
        auto [full, tuned] = tuned_with_budget(40);
        // Re-running with the budget cut at the best step must land on the
        // same parameters the full run restored.
        auto [cut, replay] = tuned_with_budget(full.best_step);
        CHECK(cut.best_step == full.best_step);
        CHECK(tuned.stacks[0].input.values() == replay.stacks[0].input.values());
        CHECK(tuned.stacks[0].pk[1].values() == replay.stacks[0].pk[1].values());
    }

    SUBCASE("a learnable verbalizer trains alongside the prompts") {
        UnitLM<float> lm(cfg, 1);
        lm.freeze();
        auto p = init_prompts<float>(cfg, 0, 2);  // verbalizer-only tuning
        auto verb = make_learnable_verbalizer<float>(2, lm.vocab());
        const auto w_before = verb.W.values();
        VerbalizerRef<float> ref{nullptr, &verb};
        TuneConfig tc;
        tc.max_steps = 20;
        tc.validate_every = 5;
        tc.patience = 10;
        tc.seed = 4;
        TuneResult res = prompt_tune(lm, p, ref, task, train, val, tc);
        CHECK(res.steps_run == 20);
        CHECK(max_abs_diff(verb.W.values(), w_before) > 0.0);
    }
}

TEST_CASE("prompt and verbalizer checkpoints") {
    const LMConfig cfg = tiny_decoder();
    UnitLM<float> lm(cfg, 3);
    auto prompts = init_prompts<float>(cfg, 3, 8);
    prompts.use_deep = false;
    const std::uint64_t hash = lm.param_hash();

    SUBCASE("prompts round trip through bytes with flags intact") {
        Checkpoint ckpt = prompts_to_checkpoint(prompts, hash);
        Checkpoint back = parse_checkpoint(serialize_checkpoint(ckpt));
        auto loaded = prompts_from_checkpoint<float>(back, cfg, hash);
        CHECK(loaded.l == 3);
        CHECK(loaded.use_input);
        CHECK(!loaded.use_deep);
        REQUIRE(loaded.stacks.size() == prompts.stacks.size());
        CHECK(loaded.stacks[0].input.values() == prompts.stacks[0].input.values());
        CHECK(loaded.stacks[0].pk[0].values() == prompts.stacks[0].pk[0].values());
        CHECK(loaded.stacks[0].pv[1].values() == prompts.stacks[0].pv[1].values());
        for (const auto& t : loaded.trainable_tensors()) {
            CHECK(t.trainable());
        }
    }

    SUBCASE("a different backbone hash is refused") {
        Checkpoint ckpt = prompts_to_checkpoint(prompts, hash);
        CHECK_THROWS_AS(prompts_from_checkpoint<float>(ckpt, cfg, hash + 1), CheckpointError);
    }

    SUBCASE("a mismatched model config is refused") {
        Checkpoint ckpt = prompts_to_checkpoint(prompts, hash);
        LMConfig other = cfg;
        other.d_model = 24;
        CHECK_THROWS_AS(prompts_from_checkpoint<float>(ckpt, other, hash), CheckpointError);
        LMConfig deeper = cfg;
        deeper.n_layers = 3;
        CHECK_THROWS_AS(prompts_from_checkpoint<float>(ckpt, deeper, hash), CheckpointError);
    }

    SUBCASE("wrong component tag is refused") {
        Checkpoint lmckpt = lm.to_checkpoint();
        CHECK_THROWS_AS(prompts_from_checkpoint<float>(lmckpt, cfg, hash), CheckpointError);
        Checkpoint pckpt = prompts_to_checkpoint(prompts, hash);
        CHECK_THROWS_AS(verbalizer_from_checkpoint<float>(pckpt), CheckpointError);
    }

    SUBCASE("verbalizer weights and temperature round trip") {
        auto verb = make_learnable_verbalizer<float>(4, lm.vocab(), 0.05);
        Rng rng(6);
        for (auto& w : verb.W.values()) {
            w = static_cast<float>(rng.normal());
        }
        Checkpoint ckpt = verbalizer_to_checkpoint(verb);
        Checkpoint back = parse_checkpoint(serialize_checkpoint(ckpt));
        auto loaded = verbalizer_from_checkpoint<float>(back);
        CHECK(loaded.n_labels() == 4);
        CHECK(loaded.vocab_width() == lm.vocab().size);
        CHECK(loaded.tau == doctest::Approx(0.05));
        CHECK(loaded.W.values() == verb.W.values());
        CHECK(loaded.W.trainable());
    }
}
