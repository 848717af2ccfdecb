#pragma once

#include "qttfem/tensor_train.hpp"

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

namespace qttfem {

/// "QTT1" binary container. Layout (all integers little-endian):
///
///   bytes 0..3   magic "QTT1"
///   u32          kind: 0 = vector, 1 = operator
///   u32          core count K
///   K times:     u32 left, u32 rows, u32 cols, u32 right
///                left*rows*cols*right float64, row-major in (left, rows, cols, right)
///
/// Vector cores are written with cols = 1. See docs/qtt1_format.md.
enum class ContainerKind : std::uint32_t { vector = 0, op = 1 };

using StoredTrain = std::variant<TensorTrain, TTOperator>;

std::vector<std::uint8_t> encode_container(const TensorTrain& t);
std::vector<std::uint8_t> encode_container(const TTOperator& op);
StoredTrain decode_container(const std::vector<std::uint8_t>& bytes);

void save_container(const std::filesystem::path& path, const TensorTrain& t);
void save_container(const std::filesystem::path& path, const TTOperator& op);
StoredTrain load_container(const std::filesystem::path& path);

}  // namespace qttfem
