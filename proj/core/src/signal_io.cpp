#include "nfpose/signal_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace nfpose {

static_assert(std::endian::native == std::endian::little, "signal files assume a little-endian host");

namespace {
constexpr std::array<char, 8> kMagic{'N', 'F', 'P', 'S', 'I', 'G', '0', '1'};

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
}  // namespace

void write_signal(const std::string& path, const ReceivedSignal& signal, std::uint64_t seed) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f.write(kMagic.data(), kMagic.size());
  put(f, static_cast<std::uint32_t>(signal.rows()));
  put(f, static_cast<std::uint32_t>(signal.slots()));
  put(f, seed);
  put(f, std::uint64_t{0});
  for (Eigen::Index j = 0; j < signal.samples.cols(); ++j) {
    for (Eigen::Index i = 0; i < signal.samples.rows(); ++i) {
      put(f, signal.samples(i, j).real());
      put(f, signal.samples(i, j).imag());
    }
  }
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

ReceivedSignal read_signal(const std::string& path, std::uint64_t* seed) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read '" + path + "'");
  std::array<char, 8> magic{};
  f.read(magic.data(), magic.size());
  if (!f || magic != kMagic) throw std::runtime_error("'" + path + "' is not a signal file");
  const auto rows = get<std::uint32_t>(f);
  const auto cols = get<std::uint32_t>(f);
  const auto s = get<std::uint64_t>(f);
  get<std::uint64_t>(f);
  if (!f) throw std::runtime_error("truncated header in '" + path + "'");
  ReceivedSignal sig;
  sig.samples.resize(rows, cols);
  for (std::uint32_t j = 0; j < cols; ++j) {
    for (std::uint32_t i = 0; i < rows; ++i) {
      const double re = get<double>(f);
      const double im = get<double>(f);
      sig.samples(i, j) = cd(re, im);
    }
  }
  if (!f) throw std::runtime_error("truncated data in '" + path + "'");
  if (seed) *seed = s;
  return sig;
}

}  // namespace nfpose
