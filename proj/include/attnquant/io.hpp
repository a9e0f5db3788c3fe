// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "attnquant/calibrate.hpp"
#include "attnquant/tensor.hpp"

namespace attnquant {

// Tensor container ("PTQT"): magic, u32 LE version (= 1), u8 dtype
// (0 = float32, 1 = unsigned int), u8 bits (32 for float32), u8 ndim,
// ndim x u64 LE dims, then the raw little-endian row-major payload
// (4 bytes per float32 element, 1 byte per integer code).
// Every write/read pair is bit-identical.

using AnyTensor = std::variant<Tensor, IntTensor>;

void write_tensor(std::ostream& os, const Tensor& t);
void write_tensor(std::ostream& os, const IntTensor& t);
void write_tensor(const std::string& path, const Tensor& t);
void write_tensor(const std::string& path, const IntTensor& t);

AnyTensor read_tensor(std::istream& is);
AnyTensor read_tensor(const std::string& path);

/// Convenience: read and require a float tensor.
Tensor read_float_tensor(const std::string& path);

// Model container ("PTQM"): u32 LE version, u32 LE block count, then per
// block a kind byte and the six parameter tensors as nested containers.
void write_model(const std::string& path, const std::vector<AttentionBlockParams>& model);
std::vector<AttentionBlockParams> read_model(const std::string& path);

// Quantized model container ("PTQQ"): config, transformed blocks and the
// per-site quantizer state produced by calibrate().
void write_quantized_model(const std::string& path, const QuantizedModel& qm);
QuantizedModel read_quantized_model(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace attnquant
