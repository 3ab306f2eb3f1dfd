#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uprompt/tensor.hpp"
#include "uprompt/unitizer.hpp"
#include "uprompt/vocab.hpp"

namespace uprompt {

/// 64-bit FNV-1a running hash.
std::uint64_t fnv1a(const unsigned char* data, std::size_t len,
                    std::uint64_t h = 14695981039346656037ull);

/// One named parameter inside a checkpoint: raw little-endian payload plus
/// enough shape metadata to rebuild the tensor. dtype is 'f' (f32) or 'd'
/// (f64); the payload length is implied by dims and dtype.
struct ParamRecord {
    std::string name;
    char dtype = 'f';
    std::vector<int> dims;
    std::vector<unsigned char> payload;

    std::size_t expected_payload_size() const;
};

/// The binary checkpoint container ("SPUL"): magic, version, component tag
/// (LM / PROMPT / VERB / QUANT), length-prefixed config text, named parameter
/// records, and a trailing FNV-1a hash of all payload bytes in record order.
struct Checkpoint {
    std::uint16_t version = 1;
    std::string component;
    std::string config_text;
    std::vector<ParamRecord> params;

    /// FNV-1a over every record payload, in order. This is the identity used
    /// for frozen-backbone invariance checks.
    std::uint64_t payload_hash() const;
    const ParamRecord& find(const std::string& name) const;
    bool has(const std::string& name) const;
};

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

template <class T>
ParamRecord tensor_to_record(const std::string& name, const Tensor<T>& t);
/// Rebuilds a tensor; the record's dtype must match T.
template <class T>
Tensor<T> tensor_from_record(const ParamRecord& rec);

/// Feature container ("SPFM"): magic, version u16, frames u32, dim u32,
/// little-endian f32 values row-major.
void save_features(const FeatureMatrix& features, const std::string& path);
FeatureMatrix load_features(const std::string& path);

/// Unit text files: one utterance per line, space-separated decimal ids.
void save_units(const std::vector<UnitSeq>& corpus, const std::string& path);
std::vector<UnitSeq> load_units(const std::string& path);

/// Quantizer persistence in the SPUL container (component "QUANT").
void save_quantizer(const QuantizerModel& model, const std::string& path);
QuantizerModel load_quantizer(const std::string& path);

}  // namespace uprompt
