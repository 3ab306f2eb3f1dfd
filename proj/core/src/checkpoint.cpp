#include "uprompt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace uprompt {

std::uint64_t fnv1a(const unsigned char* data, std::size_t len, std::uint64_t h) {
    constexpr std::uint64_t prime = 1099511628211ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<std::uint64_t>(data[i]);
        h *= prime;
    }
    return h;
}

namespace {

constexpr char kMagic[4] = {'S', 'P', 'U', 'L'};
constexpr char kFeatureMagic[4] = {'S', 'P', 'F', 'M'};
constexpr std::uint16_t kVersion = 1;

// Explicit little-endian byte packing keeps files identical across hosts.
struct ByteWriter {
    std::vector<unsigned char> buf;

    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void u8(std::uint8_t v) { buf.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
};

struct ByteReader {
    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) {
            throw CheckpointError("truncated checkpoint data");
        }
    }
    void raw(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    std::uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
};

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot open file: " + path);
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CheckpointError("cannot write file: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw CheckpointError("short write to file: " + path);
    }
}

}  // namespace

std::size_t ParamRecord::expected_payload_size() const {
    std::size_t n = 1;
    for (int d : dims) {
        if (d < 0) {
            throw CheckpointError("negative dimension in parameter record " + name);
        }
        n *= static_cast<std::size_t>(d);
    }
    const std::size_t width = dtype == 'f' ? 4 : dtype == 'd' ? 8 : 0;
    if (width == 0) {
        throw CheckpointError("unknown dtype tag in parameter record " + name);
    }
    return n * width;
}

std::uint64_t Checkpoint::payload_hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& p : params) {
        h = fnv1a(p.payload.data(), p.payload.size(), h);
    }
    return h;
}

const ParamRecord& Checkpoint::find(const std::string& name) const {
    for (const auto& p : params) {
        if (p.name == name) return p;
    }
    throw CheckpointError("checkpoint has no parameter named " + name);
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& p : params) {
        if (p.name == name) return true;
    }
    return false;
}

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt) {
    ByteWriter w;
    w.raw(kMagic, 4);
    w.u16(ckpt.version);
    w.str(ckpt.component);
    w.str(ckpt.config_text);
    w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& p : ckpt.params) {
        if (p.payload.size() != p.expected_payload_size()) {
            throw CheckpointError("parameter " + p.name + " payload size mismatch");
        }
        w.str(p.name);
        w.u8(static_cast<std::uint8_t>(p.dtype));
        w.u32(static_cast<std::uint32_t>(p.dims.size()));
        for (int d : p.dims) w.u32(static_cast<std::uint32_t>(d));
        w.raw(p.payload.data(), p.payload.size());
    }
    w.u64(ckpt.payload_hash());
    return std::move(w.buf);
}

Checkpoint parse_checkpoint(const std::vector<unsigned char>& bytes) {
    ByteReader r{bytes};
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw CheckpointError("bad checkpoint magic");
    }
    Checkpoint ckpt;
    ckpt.version = r.u16();
    if (ckpt.version != kVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(ckpt.version));
    }
    ckpt.component = r.str();
    ckpt.config_text = r.str();
    const std::uint32_t count = r.u32();
    ckpt.params.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        ParamRecord p;
        p.name = r.str();
        p.dtype = static_cast<char>(r.u8());
        const std::uint32_t rank = r.u32();
        p.dims.resize(rank);
        for (auto& d : p.dims) d = static_cast<int>(r.u32());
        p.payload.resize(p.expected_payload_size());
        r.raw(p.payload.data(), p.payload.size());
        ckpt.params.push_back(std::move(p));
    }
    const std::uint64_t stored = r.u64();
    if (r.pos != bytes.size()) {
        throw CheckpointError("trailing bytes after checkpoint hash");
    }
    if (stored != ckpt.payload_hash()) {
        throw CheckpointError("checkpoint hash mismatch (corrupt payload)");
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
    return parse_checkpoint(read_file(path));
}

template <class T>
ParamRecord tensor_to_record(const std::string& name, const Tensor<T>& t) {
    ParamRecord p;
    p.name = name;
    p.dtype = sizeof(T) == 4 ? 'f' : 'd';
    p.dims = t.shape();
    ByteWriter w;
    for (T v : t.values()) {
        if constexpr (sizeof(T) == 4) {
            w.u32(std::bit_cast<std::uint32_t>(v));
        } else {
            w.u64(std::bit_cast<std::uint64_t>(v));
        }
    }
    p.payload = std::move(w.buf);
    return p;
}

template <class T>
Tensor<T> tensor_from_record(const ParamRecord& rec) {
    const char want = sizeof(T) == 4 ? 'f' : 'd';
    if (rec.dtype != want) {
        throw CheckpointError("parameter " + rec.name + " has dtype '" +
                              std::string(1, rec.dtype) + "', expected '" +
                              std::string(1, want) + "'");
    }
    if (rec.payload.size() != rec.expected_payload_size()) {
        throw CheckpointError("parameter " + rec.name + " payload size mismatch");
    }
    ByteReader r{rec.payload};
    std::vector<T> values(rec.payload.size() / sizeof(T));
    for (auto& v : values) {
        if constexpr (sizeof(T) == 4) {
            v = std::bit_cast<float>(r.u32());
        } else {
            v = std::bit_cast<double>(r.u64());
        }
    }
    return Tensor<T>::from(rec.dims, std::move(values));
}

template ParamRecord tensor_to_record<float>(const std::string&, const Tensor<float>&);
template ParamRecord tensor_to_record<double>(const std::string&, const Tensor<double>&);
template Tensor<float> tensor_from_record<float>(const ParamRecord&);
template Tensor<double> tensor_from_record<double>(const ParamRecord&);

void save_features(const FeatureMatrix& features, const std::string& path) {
    features.validate();
    ByteWriter w;
    w.raw(kFeatureMagic, 4);
    w.u16(kVersion);
    w.u32(static_cast<std::uint32_t>(features.frames));
    w.u32(static_cast<std::uint32_t>(features.dim));
    for (float v : features.values) w.f32(v);
    write_file(path, w.buf);
}

FeatureMatrix load_features(const std::string& path) {
    const auto bytes = read_file(path);
    ByteReader r{bytes};
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kFeatureMagic, 4) != 0) {
        throw CheckpointError("bad feature-file magic in " + path);
    }
    const std::uint16_t version = r.u16();
    if (version != kVersion) {
        throw CheckpointError("unsupported feature-file version " + std::to_string(version));
    }
    FeatureMatrix f;
    f.frames = static_cast<int>(r.u32());
    f.dim = static_cast<int>(r.u32());
    if (f.dim < 1) {
        throw CheckpointError("feature file declares dim < 1: " + path);
    }
    f.values.resize(static_cast<std::size_t>(f.frames) * f.dim);
    for (auto& v : f.values) v = r.f32();
    if (r.pos != bytes.size()) {
        throw CheckpointError("trailing bytes in feature file " + path);
    }
    return f;
}

void save_units(const std::vector<UnitSeq>& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot write unit file: " + path);
    }
    for (const auto& seq : corpus) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (i) out << ' ';
            out << seq[i];
        }
        out << '\n';
    }
    if (!out) {
        throw DataError("short write to unit file: " + path);
    }
}

std::vector<UnitSeq> load_units(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open unit file: " + path);
    }
    std::vector<UnitSeq> corpus;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        UnitSeq seq;
        std::istringstream is(line);
        std::string tok;
        while (is >> tok) {
            try {
                std::size_t used = 0;
                const int u = std::stoi(tok, &used);
                if (used != tok.size()) {
                    throw std::invalid_argument(tok);
                }
                seq.push_back(u);
            } catch (const std::exception&) {
                throw DataError("unit file " + path + " line " + std::to_string(line_no) +
                                ": bad token '" + tok + "'");
            }
        }
        corpus.push_back(std::move(seq));
    }
    return corpus;
}

void save_quantizer(const QuantizerModel& model, const std::string& path) {
    Checkpoint ckpt;
    ckpt.component = "QUANT";
    std::ostringstream cfg;
    cfg << "k = " << model.k << "\n"
        << "dim = " << model.dim << "\n"
        << "seed = " << model.seed << "\n"
        << "iters_run = " << model.iters_run << "\n";
    ckpt.config_text = cfg.str();
    Tensor<double> centroids = Tensor<double>::from({model.k, model.dim}, model.centroids);
    ckpt.params.push_back(tensor_to_record("centroids", centroids));
    save_checkpoint(ckpt, path);
}

QuantizerModel load_quantizer(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.component != "QUANT") {
        throw CheckpointError("checkpoint component '" + ckpt.component +
                              "' is not a quantizer");
    }
    QuantizerModel model;
    std::istringstream cfg(ckpt.config_text);
    std::string key, eq;
    while (cfg >> key >> eq) {
        if (eq != "=") {
            throw CheckpointError("malformed quantizer config line near '" + key + "'");
        }
        if (key == "k") {
            cfg >> model.k;
        } else if (key == "dim") {
            cfg >> model.dim;
        } else if (key == "seed") {
            cfg >> model.seed;
        } else if (key == "iters_run") {
            cfg >> model.iters_run;
        } else {
            std::string skip;
            cfg >> skip;
        }
    }
    Tensor<double> centroids = tensor_from_record<double>(ckpt.find("centroids"));
    if (centroids.rows() != model.k || centroids.cols() != model.dim) {
        throw CheckpointError("quantizer centroid shape disagrees with config");
    }
    model.centroids = centroids.values();
    return model;
}

}  // namespace uprompt
