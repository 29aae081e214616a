#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vhdlx::merge {

struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> data;  // row-major

    std::size_t element_count() const;
    bool operator==(const Tensor&) const = default;
};

struct TensorMap {
    std::map<std::string, Tensor> entries;
    std::map<std::string, std::string> metadata;

    void validate() const;  // InvalidTensor: length != product of shape, non-finite values
    bool operator==(const TensorMap&) const = default;
};

struct MergeSpec {
    double t = 0.5;
    double epsilon = 1e-7;
    std::map<std::string, double> overrides;  // tensor name -> t

    void validate() const;  // InvalidSpec
    double t_for(const std::string& name) const;
};

// "TMAP1\0", u64 LE header length, JSON header, LE f32 payload in name order.
std::string serialize(const TensorMap& map);
TensorMap deserialize(std::string_view bytes);  // BadMagic, HeaderMismatch, NonFinitePayload

void save_checkpoint(const TensorMap& map, const std::string& path);
TensorMap load_checkpoint(const std::string& path);

struct Violation {
    std::string code;  // missing_key, shape_mismatch
    std::string tensor;
    std::string detail;
};

std::vector<Violation> validate_compat(const TensorMap& a, const TensorMap& b);

// Spherical interpolation of one flattened pair. Sets *antipodal when the inputs point in
// opposite directions and the linear fallback was taken.
std::vector<float> slerp(std::span<const float> u, std::span<const float> v, double t, double epsilon,
                         bool* antipodal = nullptr);

struct MergeResult {
    TensorMap merged;
    std::vector<std::string> warnings;
};

// Per-tensor SLERP. Metadata is taken from `a`. Errors: IncompatibleCheckpoints, InvalidSpec.
MergeResult slerp_merge(const TensorMap& a, const TensorMap& b, const MergeSpec& spec);

} // namespace vhdlx::merge
