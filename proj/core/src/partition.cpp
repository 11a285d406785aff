#include "nfpose/partition.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace nfpose {

double SubarrayDescriptor::rayleigh(double lambda) const {
  if (largest_dimension <= 0.0) return 0.0;  // single antenna
  return rayleigh_distance(largest_dimension, lambda);
}

SubarrayDescriptor make_subarray(const UraSpec& bs, int m, int u0, int v0, int nx, int ny,
                                 double lambda) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("subarray dimensions must be >= 1");
  SubarrayDescriptor d;
  d.m = m;
  d.u0 = u0;
  d.v0 = v0;
  d.nx = nx;
  d.ny = ny;
  d.ref_i = (nx + 1) / 2;
  d.ref_j = (ny + 1) / 2;
  d.ref_position = bs_antenna_position(bs, u0 + d.ref_i - 1, v0 + d.ref_j - 1, lambda);
  d.largest_dimension = ura_largest_dimension({nx, ny}, lambda);
  return d;
}

PartitionPlan::PartitionPlan(const UraSpec& bs, double lambda,
                             std::vector<SubarrayDescriptor> subarrays)
    : bs_(bs), lambda_(lambda), subarrays_(std::move(subarrays)) {
  bs_.validate();
  if (!(lambda > 0.0)) throw std::invalid_argument("wavelength must be positive");
  if (subarrays_.empty()) throw std::invalid_argument("partition has no subarrays");
  owner_.assign(static_cast<std::size_t>(bs_.size()), -1);
  for (std::size_t s = 0; s < subarrays_.size(); ++s) {
    const auto& d = subarrays_[s];
    if (d.m != static_cast<int>(s) + 1) {
      throw std::invalid_argument("subarray numbering must be 1..M in order");
    }
    if (d.u0 < 1 || d.v0 < 1 || d.u0 + d.nx - 1 > bs_.nx || d.v0 + d.ny - 1 > bs_.ny) {
      throw std::invalid_argument("subarray " + std::to_string(d.m) + " leaves the BS grid");
    }
    for (int i = 0; i < d.nx; ++i) {
      for (int j = 0; j < d.ny; ++j) {
        int& o = owner_[static_cast<std::size_t>(vec_row(d.u0 + i, d.v0 + j))];
        if (o >= 0) {
          throw std::invalid_argument("subarrays " + std::to_string(o + 1) + " and " +
                                      std::to_string(d.m) + " overlap");
        }
        o = static_cast<int>(s);
      }
    }
  }
  for (int o : owner_) {
    if (o < 0) throw std::invalid_argument("subarrays do not tile the BS grid");
  }
}

const SubarrayDescriptor& PartitionPlan::subarray(int m) const {
  if (m < 1 || m > size()) throw std::out_of_range("subarray index out of range");
  return subarrays_[static_cast<std::size_t>(m - 1)];
}

SubarrayIndex PartitionPlan::index_map(int u, int v) const {
  if (u < 1 || u > bs_.nx || v < 1 || v > bs_.ny) {
    throw std::out_of_range("BS index outside the grid");
  }
  const auto& d = subarrays_[static_cast<std::size_t>(owner_[static_cast<std::size_t>(vec_row(u, v))])];
  return {d.m, u - d.u0 + 1, v - d.v0 + 1};
}

GridIndex PartitionPlan::inverse_map(const SubarrayIndex& idx) const {
  const auto& d = subarray(idx.m);
  if (idx.i < 1 || idx.i > d.nx || idx.j < 1 || idx.j > d.ny) {
    throw std::out_of_range("subarray-local index out of range");
  }
  return {d.u0 + idx.i - 1, d.v0 + idx.j - 1};
}

double PartitionPlan::max_rayleigh() const {
  double r = 0.0;
  for (const auto& d : subarrays_) r = std::max(r, d.rayleigh(lambda_));
  return r;
}

PartitionPlan uniform_partition(const UraSpec& bs, int mx, int my, double lambda) {
  bs.validate();
  if (mx < 1 || my < 1) throw std::invalid_argument("partition counts must be >= 1");
  if (bs.nx % mx != 0 || bs.ny % my != 0) {
    throw std::invalid_argument("grid " + std::to_string(bs.nx) + "x" + std::to_string(bs.ny) +
                                " not divisible by " + std::to_string(mx) + "x" +
                                std::to_string(my) + " (remainders " +
                                std::to_string(bs.nx % mx) + ", " + std::to_string(bs.ny % my) +
                                ")");
  }
  const int sx = bs.nx / mx, sy = bs.ny / my;
  std::vector<SubarrayDescriptor> subs;
  subs.reserve(static_cast<std::size_t>(mx * my));
  for (int bu = 0; bu < mx; ++bu) {
    for (int bv = 0; bv < my; ++bv) {
      subs.push_back(make_subarray(bs, bu * my + bv + 1, bu * sx + 1, bv * sy + 1, sx, sy, lambda));
    }
  }
  return PartitionPlan(bs, lambda, std::move(subs));
}

SwffReport validate_swff(const PartitionPlan& plan, std::span<const Vec3> ms_antennas,
                         double lambda) {
  SwffReport rep;
  rep.margin = std::numeric_limits<double>::infinity();
  for (const auto& d : plan.subarrays()) {
    const double dr = d.rayleigh(lambda);
    for (std::size_t a = 0; a < ms_antennas.size(); ++a) {
      const double margin = (ms_antennas[a] - d.ref_position).norm() - dr;
      if (margin < rep.margin) {
        rep.margin = margin;
        rep.worst_m = d.m;
        rep.worst_antenna = static_cast<int>(a);
      }
    }
  }
  rep.pass = !(rep.margin <= 0.0);
  return rep;
}

}  // namespace nfpose
