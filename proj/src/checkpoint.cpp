// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <bit>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>

#include "shloss/error.hpp"
#include "shloss/trainer.hpp"

namespace shloss {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (std::size_t i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(b.data(), 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (std::size_t i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(b.data(), 4);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw Error("truncated checkpoint");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw Error("truncated checkpoint");
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64s(std::ostream& out, const std::vector<double>& values) {
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::vector<double> get_f64s(std::istream& in, std::size_t count) {
  std::vector<double> values(count);
  for (double& v : values) v = std::bit_cast<double>(get_u64(in));
  return values;
}

constexpr std::uint64_t kMaxParams = std::uint64_t{1} << 31;

}  // namespace

void write_checkpoint(std::ostream& out, const SegmentModel& m) {
  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, m.segment_index);
  put_u64(out, m.first_rank);
  put_u64(out, m.input_dim);
  put_u64(out, m.hidden_units);
  put_u64(out, m.output_dim);
  put_u64(out, std::bit_cast<std::uint64_t>(m.decision_threshold));
  put_f64s(out, m.hidden_weights);
  put_f64s(out, m.hidden_bias);
  put_f64s(out, m.weights);
  put_f64s(out, m.bias);
}

SegmentModel read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw Error("not a checkpoint (bad magic)");
  const auto version = get_u32(in);
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  SegmentModel m;
  m.segment_index = get_u32(in);
  m.first_rank = get_u64(in);
  m.input_dim = get_u64(in);
  m.hidden_units = get_u64(in);
  m.output_dim = get_u64(in);
  m.decision_threshold = std::bit_cast<double>(get_u64(in));
  if (m.first_rank == 0 || m.input_dim == 0 || m.output_dim == 0 || m.input_dim > kMaxParams ||
      m.output_dim > kMaxParams || m.hidden_units > kMaxParams) {
    throw Error("implausible checkpoint dimensions");
  }
  m.hidden_weights = get_f64s(in, m.input_dim * m.hidden_units);
  m.hidden_bias = get_f64s(in, m.hidden_units);
  m.weights = get_f64s(in, m.last_layer_inputs() * m.output_dim);
  m.bias = get_f64s(in, m.output_dim);
  return m;
}

void write_loss_history(std::ostream& out, std::span<const double> history) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "step,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) out << i + 1 << ',' << history[i] << '\n';
  out.flags(flags);
  out.precision(prec);
}

}  // namespace shloss
