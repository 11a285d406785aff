#pragma once

#include <span>
#include <vector>

#include "nfpose/geometry.hpp"

namespace nfpose {

struct SubarrayDescriptor {
  int m = 1;
  int u0 = 1;  // global index of the subarray's (1,1) antenna
  int v0 = 1;
  int nx = 1;
  int ny = 1;
  int ref_i = 1;  // ceil(nx/2)
  int ref_j = 1;  // ceil(ny/2)
  Vec3 ref_position = Vec3::Zero();
  double largest_dimension = 0.0;

  int size() const { return nx * ny; }
  double rayleigh(double lambda) const;
};

struct SubarrayIndex {
  int m = 1;
  int i = 1;
  int j = 1;
  bool operator==(const SubarrayIndex&) const = default;
};

SubarrayDescriptor make_subarray(const UraSpec& bs, int m, int u0, int v0, int nx, int ny,
                                 double lambda);

class PartitionPlan {
 public:
  // Rejects descriptors that overlap or fail to tile the grid.
  PartitionPlan(const UraSpec& bs, double lambda, std::vector<SubarrayDescriptor> subarrays);

  const UraSpec& bs() const { return bs_; }
  double lambda() const { return lambda_; }
  int size() const { return static_cast<int>(subarrays_.size()); }
  const std::vector<SubarrayDescriptor>& subarrays() const { return subarrays_; }
  const SubarrayDescriptor& subarray(int m) const;

  SubarrayIndex index_map(int u, int v) const;
  GridIndex inverse_map(const SubarrayIndex& idx) const;

  // Row of the vec'd (u,v) grid: (u-1) + (v-1)*nx.
  int vec_row(int u, int v) const { return (u - 1) + (v - 1) * bs_.nx; }

  double max_rayleigh() const;

 private:
  UraSpec bs_;
  double lambda_;
  std::vector<SubarrayDescriptor> subarrays_;
  std::vector<int> owner_;  // per vec row, 0-based subarray position
};

// mx x my equal subarrays, numbered m = bu*my + bv + 1.
PartitionPlan uniform_partition(const UraSpec& bs, int mx, int my, double lambda);

struct SwffReport {
  bool pass = true;
  int worst_m = 0;
  int worst_antenna = -1;  // position in the supplied list, -1 when empty
  double margin = 0.0;     // min over (m, antenna) of r - D_R,m
};

SwffReport validate_swff(const PartitionPlan& plan, std::span<const Vec3> ms_antennas, double lambda);

}  // namespace nfpose
