#pragma once

#include <string>

#include <Eigen/Dense>

#include "json.hpp"
#include "kfstab/decomposition.hpp"
#include "kfstab/kfilter.hpp"
#include "kfstab/linalg.hpp"
#include "kfstab/lmi.hpp"
#include "kfstab/simulation.hpp"
#include "kfstab/synthesis.hpp"
#include "kfstab/system.hpp"

// File formats. Matrices are row-major nested JSON arrays; CSV numbers are
// written with 17 significant digits so that a round trip is exact.

namespace kfstab::io {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const Eigen::MatrixXd& a);
/// Accepts a 2-D array; a 1-D array is read as a column. Throws FormatError.
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what);

Json system_to_json(const ContinuousLTISystem& sys);
ContinuousLTISystem system_from_json(const Json& j);

Json decomposition_to_json(const Decomposition& dec);
Json controller_to_json(const Controller& controller);
Controller controller_from_json(const Json& j);
Json report_to_json(const RunReport& report);

Json lmi_problem_to_json(const lmi::StabilizationLmi& problem);
lmi::StabilizationLmi lmi_problem_from_json(const Json& j);

Json read_json(const std::string& path);
/// Two-space indented, trailing newline.
void write_json(const std::string& path, const Json& j);

/// Header `t,u_1..u_m,y_1..y_p`.
void write_dataset_csv(const std::string& path, const Dataset& dataset);
Dataset read_dataset_csv(const std::string& path);

/// Columns t, z_1..z_nz, zdot_1..zdot_nz.
void write_filtered_csv(const std::string& path, const FilteredTrajectory& traj);

/// Columns re, im.
void write_spectrum_csv(const std::string& path, const Spectrum& spectrum);

/// Columns t, norm_x, x_1..x_n, norm_M.
void write_trajectory_csv(const std::string& path, const ClosedLoopTrajectory& traj);

}  // namespace kfstab::io
