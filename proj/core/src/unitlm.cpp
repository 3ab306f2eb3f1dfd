#include "uprompt/unitlm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "uprompt/prompts.hpp"

namespace uprompt {

void LMConfig::validate() const {
    if (n_layers < 1) {
        throw ConfigError("LM needs n_layers >= 1");
    }
    if (n_heads < 1 || d_model < 1 || d_model % n_heads != 0) {
        throw ConfigError("d_model must be positive and divisible by n_heads");
    }
    if (d_ffn < 1) {
        throw ConfigError("LM needs d_ffn >= 1");
    }
    if (n_units < 1) {
        throw ConfigError("LM needs n_units >= 1");
    }
    if (max_positions < 2) {
        throw ConfigError("LM needs max_positions >= 2");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
        throw ConfigError("LM dropout must lie in [0,1)");
    }
}

std::string LMConfig::to_text() const {
    std::ostringstream os;
    os << "variant = " << (variant == LMVariant::decoder_only ? "decoder_only" : "encoder_decoder")
       << "\n"
       << "n_layers = " << n_layers << "\n"
       << "n_heads = " << n_heads << "\n"
       << "d_model = " << d_model << "\n"
       << "d_ffn = " << d_ffn << "\n"
       << "n_units = " << n_units << "\n"
       << "max_positions = " << max_positions << "\n"
       << "dropout = " << dropout << "\n";
    return os.str();
}

LMConfig LMConfig::from_text(const std::string& text) {
    LMConfig cfg;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string key, eq, value;
        if (!(ls >> key >> eq >> value)) {
            continue;  // blank line
        }
        if (eq != "=") {
            throw ConfigError("malformed LM config line: " + line);
        }
        if (key == "variant") {
            if (value == "decoder_only") {
                cfg.variant = LMVariant::decoder_only;
            } else if (value == "encoder_decoder") {
                cfg.variant = LMVariant::encoder_decoder;
            } else {
                throw ConfigError("unknown LM variant: " + value);
            }
        } else if (key == "n_layers") {
            cfg.n_layers = std::stoi(value);
        } else if (key == "n_heads") {
            cfg.n_heads = std::stoi(value);
        } else if (key == "d_model") {
            cfg.d_model = std::stoi(value);
        } else if (key == "d_ffn") {
            cfg.d_ffn = std::stoi(value);
        } else if (key == "n_units") {
            cfg.n_units = std::stoi(value);
        } else if (key == "max_positions") {
            cfg.max_positions = std::stoi(value);
        } else if (key == "dropout") {
            cfg.dropout = std::stod(value);
        } else {
            throw ConfigError("unknown LM config key: " + key);
        }
    }
    cfg.validate();
    return cfg;
}

template <class T>
Tensor<T> attention_block(const AttentionParams<T>& w, int n_heads, const Tensor<T>& q_src,
                          const Tensor<T>& kv_src, bool causal, const Tensor<T>* pk,
                          const Tensor<T>* pv) {
    const int d = q_src.cols();
    if (kv_src.cols() != d) {
        throw ShapeError("attention: query and key/value widths differ");
    }
    if (d % n_heads != 0) {
        throw ShapeError("attention: width not divisible by head count");
    }
    if ((pk == nullptr) != (pv == nullptr)) {
        throw ShapeError("attention: key and value prompts must come together");
    }
    int l = 0;
    Tensor<T> kv_for_k = kv_src;
    Tensor<T> kv_for_v = kv_src;
    if (pk != nullptr) {
        if (pk->rows() != pv->rows() || pk->cols() != d || pv->cols() != d) {
            throw ShapeError("attention: prompt shapes must be l x d with equal l");
        }
        l = pk->rows();
        if (l > 0) {
            kv_for_k = concat_rows(*pk, kv_src);
            kv_for_v = concat_rows(*pv, kv_src);
        }
    }
    const int tq = q_src.rows();
    const int tk = kv_src.rows();
    if (causal && tq != tk) {
        throw ShapeError("attention: causal masking needs matching query/key lengths");
    }
    Tensor<T> q = matmul(q_src, w.wq);
    Tensor<T> k = matmul(kv_for_k, w.wk);
    Tensor<T> v = matmul(kv_for_v, w.wv);
    const int dh = d / n_heads;
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<int> valid(static_cast<std::size_t>(tq));
    for (int r = 0; r < tq; ++r) {
        valid[static_cast<std::size_t>(r)] = causal ? l + r + 1 : l + tk;
    }
    Tensor<T> ctx;
    for (int h = 0; h < n_heads; ++h) {
        Tensor<T> qh = slice_cols(q, h * dh, (h + 1) * dh);
        Tensor<T> kh = slice_cols(k, h * dh, (h + 1) * dh);
        Tensor<T> vh = slice_cols(v, h * dh, (h + 1) * dh);
        Tensor<T> scores = scale(matmul_nt(qh, kh), inv_sqrt);
        Tensor<T> probs = softmax_rows_masked(scores, valid);
        Tensor<T> ctx_h = matmul(probs, vh);
        ctx = h == 0 ? ctx_h : concat_cols(ctx, ctx_h);
    }
    return matmul(ctx, w.wo);
}

namespace {

template <class T>
Tensor<T> init_weight(std::vector<int> shape, Rng& rng) {
    Tensor<T> t = Tensor<T>::randn(std::move(shape), rng, static_cast<T>(0.02));
    t.set_trainable(true);
    return t;
}

template <class T>
Tensor<T> init_gain(int width) {
    Tensor<T> t = Tensor<T>::full({width}, T(1));
    t.set_trainable(true);
    return t;
}

template <class T>
Tensor<T> init_zero(std::vector<int> shape) {
    Tensor<T> t = Tensor<T>::zeros(std::move(shape));
    t.set_trainable(true);
    return t;
}

template <class T>
StackParams<T> init_stack(const LMConfig& cfg, bool with_cross, Rng& rng) {
    StackParams<T> stack;
    stack.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    for (auto& layer : stack.layers) {
        layer.ln1_g = init_gain<T>(cfg.d_model);
        layer.ln1_b = init_zero<T>({cfg.d_model});
        layer.attn.wq = init_weight<T>({cfg.d_model, cfg.d_model}, rng);
        layer.attn.wk = init_weight<T>({cfg.d_model, cfg.d_model}, rng);
        layer.attn.wv = init_weight<T>({cfg.d_model, cfg.d_model}, rng);
        layer.attn.wo = init_weight<T>({cfg.d_model, cfg.d_model}, rng);
        layer.has_cross = with_cross;
        if (with_cross) {
            layer.lnc_g = init_gain<T>(cfg.d_model);
            layer.lnc_b = init_zero<T>({cfg.d_model});
            layer.cross.wq = init_weight<T>({cfg.d_model, cfg.d_model}, rng);
            layer.cross.wk = init_weight<T>({cfg.d_model, cfg.d_model}, rng);
            layer.cross.wv = init_weight<T>({cfg.d_model, cfg.d_model}, rng);
            layer.cross.wo = init_weight<T>({cfg.d_model, cfg.d_model}, rng);
        }
        layer.ln2_g = init_gain<T>(cfg.d_model);
        layer.ln2_b = init_zero<T>({cfg.d_model});
        layer.w1 = init_weight<T>({cfg.d_model, cfg.d_ffn}, rng);
        layer.b1 = init_zero<T>({cfg.d_ffn});
        layer.w2 = init_weight<T>({cfg.d_ffn, cfg.d_model}, rng);
        layer.b2 = init_zero<T>({cfg.d_model});
    }
    stack.lnf_g = init_gain<T>(cfg.d_model);
    stack.lnf_b = init_zero<T>({cfg.d_model});
    return stack;
}

template <class T>
void collect_stack(const std::string& prefix, const StackParams<T>& stack,
                   std::vector<std::pair<std::string, Tensor<T>>>& out) {
    for (std::size_t i = 0; i < stack.layers.size(); ++i) {
        const auto& layer = stack.layers[i];
        const std::string p = prefix + "." + std::to_string(i) + ".";
        out.emplace_back(p + "ln1.g", layer.ln1_g);
        out.emplace_back(p + "ln1.b", layer.ln1_b);
        out.emplace_back(p + "attn.wq", layer.attn.wq);
        out.emplace_back(p + "attn.wk", layer.attn.wk);
        out.emplace_back(p + "attn.wv", layer.attn.wv);
        out.emplace_back(p + "attn.wo", layer.attn.wo);
        if (layer.has_cross) {
            out.emplace_back(p + "lnc.g", layer.lnc_g);
            out.emplace_back(p + "lnc.b", layer.lnc_b);
            out.emplace_back(p + "cross.wq", layer.cross.wq);
            out.emplace_back(p + "cross.wk", layer.cross.wk);
            out.emplace_back(p + "cross.wv", layer.cross.wv);
            out.emplace_back(p + "cross.wo", layer.cross.wo);
        }
        out.emplace_back(p + "ln2.g", layer.ln2_g);
        out.emplace_back(p + "ln2.b", layer.ln2_b);
        out.emplace_back(p + "ffn.w1", layer.w1);
        out.emplace_back(p + "ffn.b1", layer.b1);
        out.emplace_back(p + "ffn.w2", layer.w2);
        out.emplace_back(p + "ffn.b2", layer.b2);
    }
    out.emplace_back(prefix + ".ln_f.g", stack.lnf_g);
    out.emplace_back(prefix + ".ln_f.b", stack.lnf_b);
}

}  // namespace

template <class T>
UnitLM<T>::UnitLM(LMConfig config, std::uint64_t seed)
    : config_(config), vocab_(Vocabulary::with_units(config.n_units)) {
    config_.validate();
    Rng rng(seed);
    embed_ = init_weight<T>({vocab_.size, config_.d_model}, rng);
    pos_ = init_weight<T>({config_.max_positions, config_.d_model}, rng);
    has_encoder_ = config_.variant == LMVariant::encoder_decoder;
    if (has_encoder_) {
        enc_ = init_stack<T>(config_, false, rng);
    }
    dec_ = init_stack<T>(config_, has_encoder_, rng);
}

template <class T>
const StackParams<T>& UnitLM<T>::encoder_stack() const {
    if (!has_encoder_) {
        throw UsageError("decoder-only model has no encoder stack");
    }
    return enc_;
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>>> UnitLM<T>::named_params() const {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    out.emplace_back("embed", embed_);
    out.emplace_back("pos", pos_);
    if (has_encoder_) {
        collect_stack("enc", enc_, out);
    }
    collect_stack("dec", dec_, out);
    return out;
}

template <class T>
void UnitLM<T>::set_trainable(bool trainable) {
    for (auto& [name, t] : named_params()) {
        t.set_trainable(trainable);
    }
    if (trainable) {
        frozen_ = false;
    }
}

template <class T>
void UnitLM<T>::freeze() {
    set_trainable(false);
    frozen_ = true;
}

template <class T>
std::uint64_t UnitLM<T>::param_hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& [name, t] : named_params()) {
        const ParamRecord rec = tensor_to_record(name, t);
        h = fnv1a(rec.payload.data(), rec.payload.size(), h);
    }
    return h;
}

template <class T>
std::size_t UnitLM<T>::param_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_params()) {
        n += t.numel();
    }
    return n;
}

template <class T>
void UnitLM<T>::check_length(int content_len, int prompt_len) const {
    if (content_len + prompt_len > config_.max_positions) {
        throw LengthError("sequence length " + std::to_string(content_len) + " + prompt " +
                          std::to_string(prompt_len) + " exceeds max positions " +
                          std::to_string(config_.max_positions));
    }
}

template <class T>
Tensor<T> UnitLM<T>::embed_units(const UnitSeq& units) const {
    vocab_.check_all(units);
    if (static_cast<int>(units.size()) > config_.max_positions) {
        throw LengthError("sequence of " + std::to_string(units.size()) +
                          " units exceeds max positions " +
                          std::to_string(config_.max_positions));
    }
    if (units.empty()) {
        return Tensor<T>::zeros({0, config_.d_model});
    }
    Tensor<T> tok = gather_rows(embed_, units);
    std::vector<int> pos_ids(units.size());
    std::iota(pos_ids.begin(), pos_ids.end(), 0);
    Tensor<T> pos = gather_rows(pos_, pos_ids);
    return add(tok, pos);
}

template <class T>
Tensor<T> UnitLM<T>::embed_source(const UnitSeq& units) const {
    if (!has_encoder_) {
        throw UsageError("embed_source applies to the encoder-decoder variant");
    }
    return embed_units(units);
}

template <class T>
Tensor<T> UnitLM<T>::embed_decoder_input(const UnitSeq& source, const UnitSeq& prefix) const {
    if (has_encoder_) {
        throw UsageError("embed_decoder_input applies to the decoder-only variant");
    }
    UnitSeq ids;
    ids.reserve(source.size() + 1 + prefix.size());
    ids.insert(ids.end(), source.begin(), source.end());
    ids.push_back(vocab_.sep);
    ids.insert(ids.end(), prefix.begin(), prefix.end());
    return embed_units(ids);
}

template <class T>
Tensor<T> UnitLM<T>::run_stack(const StackParams<T>& stack, Tensor<T> h, bool causal,
                               const Tensor<T>* memory, const StackPrompts<T>* deep,
                               bool use_deep, Rng* drop_rng) const {
    const double rate = drop_rng != nullptr ? config_.dropout : 0.0;
    for (std::size_t i = 0; i < stack.layers.size(); ++i) {
        const auto& layer = stack.layers[i];
        const Tensor<T>* pk = nullptr;
        const Tensor<T>* pv = nullptr;
        if (deep != nullptr && use_deep && !deep->pk.empty()) {
            if (deep->pk.size() != stack.layers.size()) {
                throw ShapeError("deep prompt layer count does not match the stack");
            }
            pk = &deep->pk[i];
            pv = &deep->pv[i];
        }
        Tensor<T> hn = layer_norm_rows(h, layer.ln1_g, layer.ln1_b);
        Tensor<T> a = attention_block(layer.attn, config_.n_heads, hn, hn, causal, pk, pv);
        if (rate > 0.0) {
            a = dropout(a, rate, *drop_rng);
        }
        h = add(h, a);
        if (layer.has_cross) {
            if (memory == nullptr) {
                throw UsageError("encoder-decoder decoding needs encoder memory");
            }
            Tensor<T> cn = layer_norm_rows(h, layer.lnc_g, layer.lnc_b);
            Tensor<T> c = attention_block<T>(layer.cross, config_.n_heads, cn, *memory, false,
                                             nullptr, nullptr);
            if (rate > 0.0) {
                c = dropout(c, rate, *drop_rng);
            }
            h = add(h, c);
        }
        Tensor<T> fn = layer_norm_rows(h, layer.ln2_g, layer.ln2_b);
        Tensor<T> f = add_rowvec(matmul(fn, layer.w1), layer.b1);
        f = gelu(f);
        f = add_rowvec(matmul(f, layer.w2), layer.b2);
        if (rate > 0.0) {
            f = dropout(f, rate, *drop_rng);
        }
        h = add(h, f);
    }
    return layer_norm_rows(h, stack.lnf_g, stack.lnf_b);
}

template <class T>
Tensor<T> UnitLM<T>::encode(const Tensor<T>& g1, const PromptSet<T>* prompts,
                            Rng* drop_rng) const {
    if (!has_encoder_) {
        throw UsageError("encode applies to the encoder-decoder variant");
    }
    Tensor<T> h = g1;
    const StackPrompts<T>* stack_prompts = nullptr;
    int input_l = 0;
    if (prompts != nullptr) {
        stack_prompts = prompts->encoder_prompts();
        if (stack_prompts == nullptr) {
            throw ShapeError("prompt set lacks an encoder stack for this variant");
        }
        if (prompts->input_len() > 0) {
            input_l = prompts->l;
            h = apply_input_prompts(h, stack_prompts->input);
        }
    }
    check_length(g1.rows(), input_l);
    return run_stack(enc_, std::move(h), false, nullptr, stack_prompts,
                     prompts != nullptr && prompts->use_deep, drop_rng);
}

template <class T>
Tensor<T> UnitLM<T>::decode_states(const Tensor<T>& h1, const Tensor<T>* memory,
                                   const PromptSet<T>* prompts, Rng* drop_rng) const {
    if (has_encoder_ && memory == nullptr) {
        throw UsageError("encoder-decoder decoding needs encoder memory");
    }
    if (!has_encoder_ && memory != nullptr) {
        throw UsageError("decoder-only model takes no encoder memory");
    }
    Tensor<T> h = h1;
    const StackPrompts<T>* stack_prompts = nullptr;
    int input_l = 0;
    if (prompts != nullptr) {
        stack_prompts = prompts->decoder_prompts();
        if (stack_prompts == nullptr) {
            throw ShapeError("prompt set has no decoder stack");
        }
        if (prompts->input_len() > 0) {
            input_l = prompts->l;
            h = apply_input_prompts(h, stack_prompts->input);
        }
    }
    check_length(h1.rows(), input_l);
    return run_stack(dec_, std::move(h), true, memory, stack_prompts,
                     prompts != nullptr && prompts->use_deep, drop_rng);
}

template <class T>
Tensor<T> UnitLM<T>::logits_from_states(const Tensor<T>& h) const {
    return matmul_nt(h, embed_);
}

template <class T>
Tensor<T> UnitLM<T>::forward_decoder_only(const UnitSeq& tokens, const PromptSet<T>* prompts,
                                          Rng* drop_rng) const {
    if (has_encoder_) {
        throw UsageError("forward_decoder_only applies to the decoder-only variant");
    }
    Tensor<T> h = decode_states(embed_units(tokens), nullptr, prompts, drop_rng);
    return logits_from_states(h);
}

template <class T>
Tensor<T> UnitLM<T>::forward_encdec(const UnitSeq& source, const UnitSeq& dec_tokens,
                                    const PromptSet<T>* prompts, Rng* drop_rng) const {
    Tensor<T> memory = encode(embed_source(source), prompts, drop_rng);
    Tensor<T> h = decode_states(embed_units(dec_tokens), &memory, prompts, drop_rng);
    return logits_from_states(h);
}

template <class T>
Checkpoint UnitLM<T>::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.component = "LM";
    ckpt.config_text = config_.to_text();
    for (const auto& [name, t] : named_params()) {
        ckpt.params.push_back(tensor_to_record(name, t));
    }
    return ckpt;
}

template <class T>
UnitLM<T> UnitLM<T>::from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.component != "LM") {
        throw CheckpointError("checkpoint component '" + ckpt.component +
                              "' is not a unit LM");
    }
    UnitLM<T> lm(LMConfig::from_text(ckpt.config_text), 0);
    for (auto& [name, t] : lm.named_params()) {
        Tensor<T> loaded = tensor_from_record<T>(ckpt.find(name));
        if (loaded.shape() != t.shape()) {
            throw CheckpointError("parameter " + name + " shape mismatch in checkpoint");
        }
        Tensor<T> target = t;
        target.values() = loaded.values();
    }
    return lm;
}

void NoiseSpec::validate() const {
    if (mask_ratio < 0.0 || mask_ratio >= 1.0) {
        throw ConfigError("denoising mask_ratio must lie in [0,1)");
    }
    if (min_spans < 1 || max_spans < min_spans) {
        throw ConfigError("denoising needs 1 <= min_spans <= max_spans");
    }
}

UnitSeq corrupt_spans(const UnitSeq& units, const NoiseSpec& noise, const Vocabulary& vocab,
                      Rng& rng) {
    noise.validate();
    const int t_len = static_cast<int>(units.size());
    if (t_len == 0 || noise.mask_ratio == 0.0) {
        return units;
    }
    int total = static_cast<int>(std::llround(noise.mask_ratio * t_len));
    total = std::min(total, t_len - 1);  // keep at least one visible unit
    if (total < 1) {
        return units;
    }
    int n_spans = rng.range(noise.min_spans, noise.max_spans);
    n_spans = std::min(n_spans, total);
    std::vector<int> lengths(static_cast<std::size_t>(n_spans), total / n_spans);
    for (int i = 0; i < total % n_spans; ++i) {
        ++lengths[static_cast<std::size_t>(i)];
    }
    std::vector<char> masked(static_cast<std::size_t>(t_len), 0);
    std::vector<char> span_start(static_cast<std::size_t>(t_len), 0);
    for (int len : lengths) {
        std::vector<int> starts;
        for (int s = 0; s + len <= t_len; ++s) {
            bool free = true;
            for (int j = s; j < s + len; ++j) {
                if (masked[static_cast<std::size_t>(j)]) {
                    free = false;
                    break;
                }
            }
            if (free) starts.push_back(s);
        }
        if (starts.empty()) {
            continue;  // crowded sequence: place fewer spans
        }
        const int s = starts[rng.below(starts.size())];
        span_start[static_cast<std::size_t>(s)] = 1;
        for (int j = s; j < s + len; ++j) {
            masked[static_cast<std::size_t>(j)] = 1;
        }
    }
    UnitSeq out;
    out.reserve(units.size());
    for (int i = 0; i < t_len; ++i) {
        if (span_start[static_cast<std::size_t>(i)]) {
            out.push_back(vocab.mask);
        } else if (!masked[static_cast<std::size_t>(i)]) {
            out.push_back(units[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

namespace {

template <class T>
std::vector<Tensor<T>> all_param_tensors(UnitLM<T>& lm) {
    std::vector<Tensor<T>> params;
    for (auto& [name, t] : lm.named_params()) {
        Tensor<T> p = t;
        p.set_trainable(true);
        params.push_back(p);
    }
    return params;
}

}  // namespace

template <class T>
std::vector<double> pretrain_next_token(UnitLM<T>& lm, const std::vector<UnitSeq>& corpus,
                                        const PretrainConfig& cfg) {
    if (lm.config().variant != LMVariant::decoder_only) {
        throw UsageError("next-token pretraining applies to the decoder-only variant");
    }
    if (corpus.empty()) {
        throw DataError("pretraining corpus is empty");
    }
    if (cfg.epochs < 1) {
        throw ConfigError("pretraining needs epochs >= 1");
    }
    auto params = all_param_tensors(lm);
    Adam<T> opt(params, cfg.adam);
    Rng order_rng(cfg.seed);
    Rng drop_rng = order_rng.fork();
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> epoch_losses;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t idx : order) {
            const UnitSeq& units = corpus[idx];
            if (units.empty()) {
                continue;
            }
            UnitSeq stream = units;
            stream.push_back(lm.vocab().eos);
            UnitSeq inputs(stream.begin(), stream.end() - 1);
            std::vector<int> targets(stream.begin() + 1, stream.end());
            Rng* drop = lm.config().dropout > 0.0 ? &drop_rng : nullptr;
            Tensor<T> logits = lm.forward_decoder_only(inputs, nullptr, drop);
            Tensor<T> loss = cross_entropy_rows(logits, targets);
            const double value = static_cast<double>(loss.item());
            if (!std::isfinite(value)) {
                throw NumericError("pretraining loss became non-finite");
            }
            opt.zero_grad();
            loss.backward();
            opt.step();
            total += value;
            ++steps;
        }
        if (steps == 0) {
            throw DataError("pretraining corpus has no usable sequences");
        }
        epoch_losses.push_back(total / static_cast<double>(steps));
    }
    return epoch_losses;
}

template <class T>
std::vector<double> pretrain_denoise(UnitLM<T>& lm, const std::vector<UnitSeq>& corpus,
                                     const PretrainConfig& cfg) {
    if (lm.config().variant != LMVariant::encoder_decoder) {
        throw UsageError("denoising pretraining applies to the encoder-decoder variant");
    }
    if (corpus.empty()) {
        throw DataError("pretraining corpus is empty");
    }
    if (cfg.epochs < 1) {
        throw ConfigError("pretraining needs epochs >= 1");
    }
    cfg.noise.validate();
    auto params = all_param_tensors(lm);
    Adam<T> opt(params, cfg.adam);
    Rng order_rng(cfg.seed);
    Rng drop_rng = order_rng.fork();
    Rng noise_rng = order_rng.fork();
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> epoch_losses;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t idx : order) {
            const UnitSeq& units = corpus[idx];
            if (units.empty()) {
                continue;
            }
            const UnitSeq corrupted = corrupt_spans(units, cfg.noise, lm.vocab(), noise_rng);
            UnitSeq dec_in;
            dec_in.reserve(units.size() + 1);
            dec_in.push_back(lm.vocab().bos);
            dec_in.insert(dec_in.end(), units.begin(), units.end());
            std::vector<int> targets(units.begin(), units.end());
            targets.push_back(lm.vocab().eos);
            Rng* drop = lm.config().dropout > 0.0 ? &drop_rng : nullptr;
            Tensor<T> logits = lm.forward_encdec(corrupted, dec_in, nullptr, drop);
            Tensor<T> loss = cross_entropy_rows(logits, targets);
            const double value = static_cast<double>(loss.item());
            if (!std::isfinite(value)) {
                throw NumericError("pretraining loss became non-finite");
            }
            opt.zero_grad();
            loss.backward();
            opt.step();
            total += value;
            ++steps;
        }
        if (steps == 0) {
            throw DataError("pretraining corpus has no usable sequences");
        }
        epoch_losses.push_back(total / static_cast<double>(steps));
    }
    return epoch_losses;
}

template <class T>
double next_token_accuracy(const UnitLM<T>& lm, const std::vector<UnitSeq>& corpus) {
    NoGradGuard guard;
    std::size_t correct = 0, total = 0;
    for (const auto& units : corpus) {
        if (units.empty()) {
            continue;
        }
        UnitSeq stream = units;
        stream.push_back(lm.vocab().eos);
        UnitSeq inputs(stream.begin(), stream.end() - 1);
        Tensor<T> logits = lm.forward_decoder_only(inputs, nullptr, nullptr);
        const int vw = logits.cols();
        for (std::size_t t = 0; t + 1 < stream.size(); ++t) {
            const T* row = logits.values().data() + t * static_cast<std::size_t>(vw);
            const std::vector<T> row_v(row, row + vw);
            if (argmax(row_v) == stream[t + 1]) {
                ++correct;
            }
            ++total;
        }
    }
    if (total == 0) {
        throw DataError("no positions to score");
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

template <class T>
double copy_accuracy(const UnitLM<T>& lm, const std::vector<UnitSeq>& corpus) {
    NoGradGuard guard;
    std::size_t correct = 0, total = 0;
    for (const auto& units : corpus) {
        if (units.empty()) {
            continue;
        }
        UnitSeq dec_in;
        dec_in.push_back(lm.vocab().bos);
        dec_in.insert(dec_in.end(), units.begin(), units.end());
        std::vector<int> targets(units.begin(), units.end());
        targets.push_back(lm.vocab().eos);
        Tensor<T> logits = lm.forward_encdec(units, dec_in, nullptr, nullptr);
        const int vw = logits.cols();
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const T* row = logits.values().data() + t * static_cast<std::size_t>(vw);
            const std::vector<T> row_v(row, row + vw);
            if (argmax(row_v) == targets[t]) {
                ++correct;
            }
            ++total;
        }
    }
    if (total == 0) {
        throw DataError("no positions to score");
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

#define UPROMPT_INSTANTIATE_LM(T)                                                               \
    template Tensor<T> attention_block<T>(const AttentionParams<T>&, int, const Tensor<T>&,     \
                                          const Tensor<T>&, bool, const Tensor<T>*,             \
                                          const Tensor<T>*);                                    \
    template class UnitLM<T>;                                                                   \
    template std::vector<double> pretrain_next_token<T>(UnitLM<T>&,                             \
                                                        const std::vector<UnitSeq>&,           \
                                                        const PretrainConfig&);                 \
    template std::vector<double> pretrain_denoise<T>(UnitLM<T>&, const std::vector<UnitSeq>&,  \
                                                     const PretrainConfig&);                    \
    template double next_token_accuracy<T>(const UnitLM<T>&, const std::vector<UnitSeq>&);     \
    template double copy_accuracy<T>(const UnitLM<T>&, const std::vector<UnitSeq>&);

UPROMPT_INSTANTIATE_LM(float)
UPROMPT_INSTANTIATE_LM(double)

#undef UPROMPT_INSTANTIATE_LM

}  // namespace uprompt
