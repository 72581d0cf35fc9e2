#include "kfstab/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "kfstab/errors.hpp"

namespace kfstab::io {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << std::setprecision(17);
  return out;
}

std::vector<double> parse_row(const std::string& line, const std::string& path, int line_no) {
  std::vector<double> row;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      row.push_back(std::stod(cell, &used));
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
    }
  }
  return row;
}

}  // namespace

Json matrix_to_json(const Eigen::MatrixXd& a) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw FormatError(what + ": expected an array");
  if (j.empty()) return Eigen::MatrixXd(0, 0);
  if (!j.front().is_array()) {
    Eigen::MatrixXd column(j.size(), 1);
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) throw FormatError(what + ": non-numeric entry");
      column(i, 0) = j[i].get<double>();
    }
    return column;
  }
  const std::size_t cols = j.front().size();
  Eigen::MatrixXd a(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw FormatError(what + ": ragged rows");
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw FormatError(what + ": non-numeric entry");
      a(i, k) = j[i][k].get<double>();
    }
  }
  return a;
}

Json system_to_json(const ContinuousLTISystem& sys) {
  Json j;
  j["A"] = matrix_to_json(sys.a);
  j["B"] = matrix_to_json(sys.b);
  j["C"] = matrix_to_json(sys.c);
  return j;
}

ContinuousLTISystem system_from_json(const Json& j) {
  for (const char* key : {"A", "B", "C"}) {
    if (!j.contains(key)) throw FormatError(std::string("system: missing key ") + key);
  }
  ContinuousLTISystem sys{matrix_from_json(j["A"], "A"), matrix_from_json(j["B"], "B"),
                          matrix_from_json(j["C"], "C")};
  try {
    sys.validate();
  } catch (const DimensionError& e) {
    throw FormatError(e.what());
  }
  return sys;
}

Json decomposition_to_json(const Decomposition& dec) {
  Json j;
  j["l"] = dec.l;
  j["sigma0"] = std::vector<double>(dec.sigma0.data(), dec.sigma0.data() + dec.sigma0.size());
  j["T_z"] = matrix_to_json(dec.t_z);
  return j;
}

Json controller_to_json(const Controller& controller) {
  Json j;
  j["F"] = matrix_to_json(controller.f);
  j["K_e"] = matrix_to_json(controller.k_e);
  j["n"] = controller.n;
  j["m"] = controller.m;
  j["p"] = controller.p;
  return j;
}

Controller controller_from_json(const Json& j) {
  for (const char* key : {"F", "K_e", "n", "m", "p"}) {
    if (!j.contains(key)) throw FormatError(std::string("controller: missing key ") + key);
  }
  Controller c;
  c.f = matrix_from_json(j["F"], "F");
  c.k_e = matrix_from_json(j["K_e"], "K_e");
  c.n = j["n"].get<int>();
  c.m = j["m"].get<int>();
  c.p = j["p"].get<int>();
  try {
    c.validate();
  } catch (const DimensionError& e) {
    throw FormatError(e.what());
  }
  return c;
}

Json report_to_json(const RunReport& r) {
  Json j;
  j["stage"] = r.stage;
  j["message"] = r.message;
  j["n"] = r.n;
  j["m"] = r.m;
  j["p"] = r.p;
  j["n_z"] = r.n_z;
  j["l"] = r.l;
  j["N"] = r.samples;
  j["augmented_samples"] = r.augmented_samples;
  j["sigma0"] = r.sigma0;
  j["filter_step"] = r.filter_step;
  j["excitation"] = {{"min_eig", r.excitation_min_eig}, {"max_eig", r.excitation_max_eig}};
  j["region"] = {{"decay_rate", r.decay_rate}, {"max_modulus", r.max_modulus}};
  j["residuals"] = {{"epsilon", r.epsilon},
                    {"pd", r.pd_residual},
                    {"nd", r.nd_residual},
                    {"symmetry", r.symmetry_defect}};
  j["zaq_condition"] = r.zaq_condition;
  j["warnings"] = r.warnings;
  return j;
}

Json lmi_problem_to_json(const lmi::StabilizationLmi& problem) {
  Json j;
  j["Z_a"] = matrix_to_json(problem.z_a);
  j["Zdot_a"] = matrix_to_json(problem.z_a_dot);
  j["epsilon"] = problem.epsilon;
  j["decay_rate"] = problem.decay_rate;
  j["max_modulus"] = problem.max_modulus;
  return j;
}

lmi::StabilizationLmi lmi_problem_from_json(const Json& j) {
  for (const char* key : {"Z_a", "Zdot_a", "epsilon"}) {
    if (!j.contains(key)) throw FormatError(std::string("lmi problem: missing key ") + key);
  }
  lmi::StabilizationLmi problem;
  problem.z_a = matrix_from_json(j["Z_a"], "Z_a");
  problem.z_a_dot = matrix_from_json(j["Zdot_a"], "Zdot_a");
  problem.epsilon = j["epsilon"].get<double>();
  problem.decay_rate = j.value("decay_rate", 0.0);
  problem.max_modulus = j.value("max_modulus", 0.0);
  return problem;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_dataset_csv(const std::string& path, const Dataset& dataset) {
  dataset.validate();
  std::ofstream out = open_out(path);
  out << 't';
  for (int i = 0; i < dataset.m(); ++i) out << ",u_" << i + 1;
  for (int i = 0; i < dataset.p(); ++i) out << ",y_" << i + 1;
  out << '\n';
  for (int k = 0; k < dataset.size(); ++k) {
    out << dataset.times[k];
    for (int i = 0; i < dataset.m(); ++i) out << ',' << dataset.u(i, k);
    for (int i = 0; i < dataset.p(); ++i) out << ',' << dataset.y(i, k);
    out << '\n';
  }
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw FormatError(path + ": empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  std::vector<std::string> names;
  {
    std::stringstream ss(header);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  if (names.empty() || names.front() != "t") throw FormatError(path + ": header must start with t");
  int m = 0;
  int p = 0;
  for (std::size_t i = 1; i < names.size(); ++i) {
    const bool is_u = names[i] == "u_" + std::to_string(m + 1);
    const bool is_y = names[i] == "y_" + std::to_string(p + 1);
    if (is_u && p == 0) {
      ++m;
    } else if (is_y) {
      ++p;
    } else {
      throw FormatError(path + ": unexpected column '" + names[i] + "'");
    }
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_row(line, path, line_no));
    if (rows.back().size() != names.size()) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": wrong column count");
    }
  }
  Dataset ds;
  ds.u.resize(m, static_cast<Eigen::Index>(rows.size()));
  ds.y.resize(p, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ds.times.push_back(rows[k][0]);
    for (int i = 0; i < m; ++i) ds.u(i, k) = rows[k][1 + i];
    for (int i = 0; i < p; ++i) ds.y(i, k) = rows[k][1 + m + i];
  }
  ds.validate();
  return ds;
}

void write_filtered_csv(const std::string& path, const FilteredTrajectory& traj) {
  std::ofstream out = open_out(path);
  const int n_z = traj.n_z();
  out << 't';
  for (int i = 0; i < n_z; ++i) out << ",z_" << i + 1;
  for (int i = 0; i < n_z; ++i) out << ",zdot_" << i + 1;
  out << '\n';
  for (int k = 0; k < traj.size(); ++k) {
    out << traj.times[k];
    for (int i = 0; i < n_z; ++i) out << ',' << traj.z(i, k);
    for (int i = 0; i < n_z; ++i) out << ',' << traj.z_dot(i, k);
    out << '\n';
  }
}

void write_spectrum_csv(const std::string& path, const Spectrum& spectrum) {
  std::ofstream out = open_out(path);
  out << "re,im\n";
  for (const auto& lambda : spectrum.eigenvalues) {
    out << lambda.real() << ',' << lambda.imag() << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const ClosedLoopTrajectory& traj) {
  std::ofstream out = open_out(path);
  const auto n = traj.x.rows();
  out << "t,norm_x";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x_" << i + 1;
  out << ",norm_M\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    out << traj.times[k] << ',' << traj.x_norm(k);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << traj.x(i, k);
    out << ',' << traj.m_norm(k) << '\n';
  }
}

}  // namespace kfstab::io
