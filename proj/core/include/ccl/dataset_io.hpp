#pragma once

#include <filesystem>
#include <iosfwd>

#include <nlohmann/json.hpp>

#include "ccl/policies.hpp"
#include "ccl/simulator.hpp"

namespace ccl {

/// Writes `t,x1..xn,u1..un` and, when every trajectory has ground truth,
/// `v1..vn,w1..wn,b1..bk`. Time restarts at 0 for each trajectory.
void write_dataset_csv(std::ostream& os, const Dataset& ds);

/// Inverse of write_dataset_csv. A non-increasing t starts a new trajectory.
/// Prior values are left empty; see attach_prior. Ground-truth columns are
/// read back into v/w/b (A is not serialised).
Dataset read_dataset_csv(std::istream& is);

/// Metadata sidecar: seed, system, constraint, noise, dt, dimensions and
/// per-trajectory lengths.
nlohmann::json dataset_sidecar(const Dataset& ds);

void save_dataset(const std::filesystem::path& csv_path, const Dataset& ds);
/// Reads the CSV and, if present next to it, the `.json` sidecar.
Dataset load_dataset(const std::filesystem::path& csv_path);

/// Fills Observation::pi with the given prior evaluated at each state.
void attach_prior(Dataset& ds, const PolicySpec& prior);

}  // namespace ccl
