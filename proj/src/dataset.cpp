#include "jlsgev/dataset.hpp"

#include <cmath>

#include "jlsgev/errors.hpp"

namespace jlsgev {

namespace {

void validate_process(const ProcessData& p, const char* tag) {
  const std::string name(tag);
  if (p.locations.size() != p.site_ids.size()) {
    throw ValidationError(name + ": site id / location count mismatch");
  }
  if (p.obs.rows() != p.n_sites()) {
    throw ValidationError(name + ": observation rows != site count");
  }
  if (p.n_sites() == 0) throw ValidationError(name + ": no sites");
  for (const auto& loc : p.locations) {
    if (!loc.allFinite()) throw ValidationError(name + ": non-finite location");
  }
  for (int i = 0; i < p.obs.rows(); ++i) {
    bool any = false;
    for (int j = 0; j < p.obs.cols(); ++j) {
      const double v = p.obs(i, j);
      if (std::isnan(v)) continue;
      if (!std::isfinite(v)) {
        throw ValidationError(name + ": non-finite observation at site " +
                              p.site_ids[i]);
      }
      any = true;
    }
    if (!any) {
      throw ValidationError(name + ": site " + p.site_ids[i] +
                            " has no non-missing replicate");
    }
  }
}

}  // namespace

void Dataset::validate() const {
  validate_process(z1, "process 1");
  validate_process(z2, "process 2");
}

}  // namespace jlsgev
