#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace jlsgev {

// Block-maxima observations for one process. obs is sites x replicates with
// NaN marking missing cells; replicate counts may differ between processes.
struct ProcessData {
  std::vector<std::string> site_ids;
  std::vector<Eigen::Vector2d> locations;  // planar coordinates
  Eigen::MatrixXd obs;

  int n_sites() const { return static_cast<int>(locations.size()); }
};

struct Dataset {
  ProcessData z1;
  ProcessData z2;

  // Throws ValidationError on dimension mismatches, non-finite locations,
  // or any site with zero non-missing replicates.
  void validate() const;
};

}  // namespace jlsgev
