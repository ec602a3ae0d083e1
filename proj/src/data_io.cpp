#include "lcrecon/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lcrecon/checkpoint.hpp"
#include "lcrecon/error.hpp"
#include "lcrecon/transforms.hpp"

namespace lcrecon {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Header plus data rows with their 1-based line numbers.
struct CsvFile {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

CsvFile read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  CsvFile f;
  f.name = path.string();
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (f.header.empty()) {
      f.header = std::move(cells);
    } else {
      f.rows.emplace_back(n, std::move(cells));
    }
  }
  return f;
}

void expect_header(const CsvFile& f, const std::vector<std::vector<std::string>>& allowed) {
  for (const auto& h : allowed) {
    if (f.header == h) return;
  }
  std::string want;
  for (const auto& h : allowed) {
    if (!want.empty()) want += " or ";
    for (std::size_t i = 0; i < h.size(); ++i) want += (i ? "," : "") + h[i];
  }
  throw ParseError(f.name, 1, "expected header " + want);
}

double parse_real(const CsvFile& f, std::size_t line, const std::string& text,
                  const char* column) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError(f.name, line, std::string("column ") + column + ": not a finite number '" +
                                       text + "'");
  }
  return v;
}

long long parse_integer(const CsvFile& f, std::size_t line, const std::string& text,
                        const char* column) {
  long long v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ParseError(f.name, line, std::string("column ") + column + ": not an integer '" +
                                       text + "'");
  }
  return v;
}

Index parse_cell(const CsvFile& f, std::size_t line, const std::string& text,
                 const Lattice& lattice) {
  const long long id = parse_integer(f, line, text, "cell_id");
  if (id < 0 || id >= lattice.size()) {
    throw ParseError(f.name, line, "cell_id " + text + " outside the lattice");
  }
  return static_cast<Index>(id);
}

void check_width(const CsvFile& f, std::size_t line, const std::vector<std::string>& row) {
  if (row.size() != f.header.size()) {
    throw ParseError(f.name, line,
                     "expected " + std::to_string(f.header.size()) + " fields, got " +
                         std::to_string(row.size()));
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::size_t clamp_fraction(double& value) {
  if (value < kObservationClamp) {
    value = kObservationClamp;
    return 1;
  }
  if (value > 1.0 - kObservationClamp) {
    value = 1.0 - kObservationClamp;
    return 1;
  }
  return 0;
}

std::size_t clamp_composition(Eigen::Vector3d& cover) {
  const double total = cover.sum();
  if (std::abs(total - 1.0) > 1e-12) cover /= total;
  Index largest = 0;
  cover.maxCoeff(&largest);
  std::size_t clamped = 0;
  double added = 0.0;
  for (Index i = 0; i < 3; ++i) {
    if (i != largest && cover(i) < kObservationClamp) {
      added += kObservationClamp - cover(i);
      cover(i) = kObservationClamp;
      ++clamped;
    }
  }
  if (clamped > 0) cover(largest) -= added;
  return clamped;
}

void apply_boundary_policy(ObservationSet& obs) {
  std::size_t lcc = 0;
  std::size_t alcc = 0;
  for (auto& o : obs.lcc) lcc += clamp_composition(o.cover);
  for (auto& o : obs.alcc) alcc += clamp_fraction(o.value);
  obs.clamp_log["lcc"] += lcc;
  obs.clamp_log["alcc"] += alcc;
}

ObservationSet load_observations(const ObservationPaths& paths, const Lattice& lattice,
                                 int n_datasets) {
  if (n_datasets < 1) throw InvalidArgument("load_observations: need at least one dataset");
  ObservationSet obs;
  obs.n_datasets = n_datasets;
  obs.clamp_log["lcc"] = 0;
  obs.clamp_log["alcc"] = 0;

  if (!paths.lcc.empty()) {
    const CsvFile f = read_csv(paths.lcc);
    if (!f.header.empty()) expect_header(f, {{"cell_id", "L_C", "L_B", "L_U"}});
    std::set<Index> seen;
    for (const auto& [line, row] : f.rows) {
      check_width(f, line, row);
      DirichletObs o;
      o.cell = parse_cell(f, line, row[0], lattice);
      const char* names[] = {"L_C", "L_B", "L_U"};
      for (int i = 0; i < 3; ++i) {
        o.cover(i) = parse_real(f, line, row[static_cast<std::size_t>(i) + 1], names[i]);
        if (o.cover(i) < 0.0 || o.cover(i) > 1.0) {
          throw DataError(f.name + ":" + std::to_string(line) + ": " + names[i] +
                          " outside [0, 1]");
        }
      }
      const double total = o.cover.sum();
      if (total < 0.99 || total > 1.01) {
        throw DataError(f.name + ":" + std::to_string(line) + ": composition sums to " +
                        format_double(total) + ", outside [0.99, 1.01]");
      }
      if (!seen.insert(o.cell).second) {
        throw DataError(f.name + ":" + std::to_string(line) + ": duplicate cell_id " + row[0]);
      }
      obs.clamp_log["lcc"] += clamp_composition(o.cover);
      obs.lcc.push_back(o);
    }
  }

  if (!paths.alcc.empty()) {
    const CsvFile f = read_csv(paths.alcc);
    if (!f.header.empty()) expect_header(f, {{"cell_id", "dataset", "H"}});
    std::set<std::pair<Index, int>> seen;
    for (const auto& [line, row] : f.rows) {
      check_width(f, line, row);
      BetaObs o;
      o.cell = parse_cell(f, line, row[0], lattice);
      const long long k = parse_integer(f, line, row[1], "dataset");
      if (k < 1 || k > n_datasets) {
        throw ParseError(f.name, line,
                         "dataset must be in 1.." + std::to_string(n_datasets) + ", got " + row[1]);
      }
      o.dataset = static_cast<int>(k - 1);
      o.value = parse_real(f, line, row[2], "H");
      if (o.value < 0.0 || o.value > 1.0) {
        throw DataError(f.name + ":" + std::to_string(line) + ": H outside [0, 1]");
      }
      if (!seen.insert({o.cell, o.dataset}).second) {
        throw DataError(f.name + ":" + std::to_string(line) + ": duplicate (cell_id, dataset)");
      }
      obs.clamp_log["alcc"] += clamp_fraction(o.value);
      obs.alcc.push_back(o);
    }
  }
  obs.validate(lattice.size());
  return obs;
}

CovariateTable load_covariates(const std::filesystem::path& path, const Lattice& lattice) {
  const CsvFile f = read_csv(path);
  if (f.header.empty()) throw ParseError(f.name, 1, "missing header");
  expect_header(f, {{"cell_id", "elevation"}, {"cell_id", "elevation", "lpj1", "lpj2"}});
  std::vector<std::string> names(f.header.begin() + 1, f.header.end());
  Eigen::MatrixXd raw(lattice.size(), static_cast<Index>(names.size()));
  std::vector<bool> seen(static_cast<std::size_t>(lattice.size()), false);
  for (const auto& [line, row] : f.rows) {
    check_width(f, line, row);
    const Index cell = parse_cell(f, line, row[0], lattice);
    if (seen[static_cast<std::size_t>(cell)]) {
      throw DataError(f.name + ":" + std::to_string(line) + ": duplicate cell_id " + row[0]);
    }
    seen[static_cast<std::size_t>(cell)] = true;
    for (std::size_t j = 0; j < names.size(); ++j) {
      raw(cell, static_cast<Index>(j)) = parse_real(f, line, row[j + 1], names[j].c_str());
    }
  }
  const auto missing = std::find(seen.begin(), seen.end(), false);
  if (missing != seen.end()) {
    throw DataError(f.name + ": no covariates for cell_id " +
                    std::to_string(missing - seen.begin()));
  }
  return CovariateTable::from_raw(std::move(names), std::move(raw));
}

void write_observations(const ObservationSet& obs, const ObservationPaths& paths) {
  std::ostringstream lcc;
  lcc << "cell_id,L_C,L_B,L_U\n";
  for (const auto& o : obs.lcc) {
    lcc << o.cell << ',' << format_double(o.cover(0)) << ',' << format_double(o.cover(1)) << ','
        << format_double(o.cover(2)) << '\n';
  }
  write_file_atomic(paths.lcc, lcc.str());

  std::ostringstream alcc;
  alcc << "cell_id,dataset,H\n";
  for (const auto& o : obs.alcc) {
    alcc << o.cell << ',' << (o.dataset + 1) << ',' << format_double(o.value) << '\n';
  }
  write_file_atomic(paths.alcc, alcc.str());
}

void write_covariates(const CovariateTable& covariates, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "cell_id";
  for (const auto& n : covariates.names) os << ',' << n;
  os << '\n';
  for (Index i = 0; i < covariates.raw.rows(); ++i) {
    os << i;
    for (Index j = 0; j < covariates.raw.cols(); ++j) os << ',' << format_double(covariates.raw(i, j));
    os << '\n';
  }
  write_file_atomic(path, os.str());
}

// ---- posterior output ----------------------------------------------------------

namespace {

const std::vector<std::string> kSummaryHeader = {
    "cell_id", "row", "col", "p_C", "p_B", "p_U", "p_H", "z_C", "z_B", "z_U", "p_H_q025",
    "p_H_q975"};

}  // namespace

std::vector<SummaryRow> summary_rows(const PosteriorSummary& summary, const Lattice& lattice) {
  std::vector<SummaryRow> rows;
  rows.reserve(summary.cells.size());
  for (std::size_t i = 0; i < summary.cells.size(); ++i) {
    const auto& c = summary.cells[i];
    SummaryRow r;
    r.cell_id = static_cast<Index>(i);
    r.row = lattice.row(r.cell_id);
    r.col = lattice.col(r.cell_id);
    r.p_natural = c.p_natural;
    r.p_human = c.p_human;
    r.cover = c.cover;
    r.p_human_q025 = c.p_human_interval.lower;
    r.p_human_q975 = c.p_human_interval.upper;
    rows.push_back(r);
  }
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  std::ostringstream os;
  for (std::size_t i = 0; i < kSummaryHeader.size(); ++i) os << (i ? "," : "") << kSummaryHeader[i];
  os << '\n';
  for (const auto& r : rows) {
    os << r.cell_id << ',' << r.row << ',' << r.col;
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.p_natural(i));
    os << ',' << format_double(r.p_human);
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.cover(i));
    os << ',' << format_double(r.p_human_q025) << ',' << format_double(r.p_human_q975) << '\n';
  }
  write_file_atomic(path, os.str());
}

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
  const CsvFile f = read_csv(path);
  expect_header(f, {kSummaryHeader});
  std::vector<SummaryRow> rows;
  for (const auto& [line, row] : f.rows) {
    check_width(f, line, row);
    SummaryRow r;
    r.cell_id = static_cast<Index>(parse_integer(f, line, row[0], "cell_id"));
    r.row = static_cast<Index>(parse_integer(f, line, row[1], "row"));
    r.col = static_cast<Index>(parse_integer(f, line, row[2], "col"));
    for (int i = 0; i < 3; ++i) r.p_natural(i) = parse_real(f, line, row[3 + i], "p");
    r.p_human = parse_real(f, line, row[6], "p_H");
    for (int i = 0; i < 3; ++i) r.cover(i) = parse_real(f, line, row[7 + i], "z");
    r.p_human_q025 = parse_real(f, line, row[10], "p_H_q025");
    r.p_human_q975 = parse_real(f, line, row[11], "p_H_q975");
    rows.push_back(r);
  }
  return rows;
}

Eigen::Vector3i colormap_entry(int index) {
  // Two linear segments through the viridis end and mid points.
  const Eigen::Vector3d lo(68, 1, 84), mid(33, 145, 140), hi(253, 231, 37);
  const double t = std::clamp(index, 0, 255) / 255.0;
  const Eigen::Vector3d c = t < 0.5 ? lo + 2.0 * t * (mid - lo) : mid + (2.0 * t - 1.0) * (hi - mid);
  return c.array().round().cast<int>().matrix();
}

void write_heatmap(const Eigen::VectorXd& values, const Lattice& lattice, double lo, double hi,
                   const std::filesystem::path& path) {
  if (values.size() != lattice.size()) throw InvalidArgument("write_heatmap: size mismatch");
  if (!(hi > lo)) throw InvalidArgument("write_heatmap: empty value range");
  std::string out = "P6\n" + std::to_string(lattice.n_cols) + " " + std::to_string(lattice.n_rows) +
                    "\n255\n";
  for (Index r = lattice.n_rows - 1; r >= 0; --r) {
    for (Index c = 0; c < lattice.n_cols; ++c) {
      const double v = values(lattice.id(r, c));
      const double t = std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
      const auto rgb = colormap_entry(static_cast<int>(std::lround(255.0 * std::clamp(t, 0.0, 1.0))));
      for (int k = 0; k < 3; ++k) out.push_back(static_cast<char>(rgb(k)));
    }
  }
  write_file_atomic(path, out);
}

HeatmapImage read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string magic;
  int maxval = 0;
  HeatmapImage img;
  is >> magic >> img.width >> img.height >> maxval;
  if (magic != "P6" || maxval != 255 || img.width < 1 || img.height < 1) {
    throw DataError(path.string() + ": not an 8-bit P6 image");
  }
  is.get();
  img.rgb.resize(static_cast<std::size_t>(img.width * img.height * 3));
  is.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!is) throw DataError(path.string() + ": truncated pixel data");
  return img;
}

std::vector<std::string> write_summaries(const ChainOutput& chain, const ModelDesign& design,
                                         const std::filesystem::path& dir) {
  const Lattice& lattice = design.lattice();
  if (chain.n_rows != lattice.n_rows || chain.n_cols != lattice.n_cols) {
    throw InvalidArgument("write_summaries: chain lattice does not match design");
  }
  const PosteriorSummary summary = posterior_summaries(chain);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<std::string> files;
  const auto rows = summary_rows(summary, lattice);
  write_summary_csv(rows, dir / "summaries.csv");
  files.push_back("summaries.csv");

  {
    std::ostringstream os;
    os << "cell_id,region,center_1,center_2,cov_11,cov_12,cov_22,radius_sq\n";
    for (std::size_t i = 0; i < summary.cells.size(); ++i) {
      const auto emit = [&](const char* name, const CredibleEllipse& e) {
        os << i << ',' << name << ',' << format_double(e.center(0)) << ','
           << format_double(e.center(1)) << ',' << format_double(e.covariance(0, 0)) << ','
           << format_double(e.covariance(0, 1)) << ',' << format_double(e.covariance(1, 1))
           << ',' << format_double(e.radius_sq) << '\n';
      };
      emit("natural", summary.cells[i].natural_region);
      emit("cover", summary.cells[i].cover_region);
    }
    write_file_atomic(dir / "ellipses.csv", os.str());
    files.push_back("ellipses.csv");
  }

  {
    std::ostringstream os;
    os << "parameter,mean,q025,q975\n";
    const auto emit = [&](const std::string& name, const Interval& iv) {
      os << name << ',' << format_double(iv.mean) << ',' << format_double(iv.lower) << ','
         << format_double(iv.upper) << '\n';
    };
    emit("alpha", summary.alpha);
    emit("lambda", summary.lambda);
    emit("kappa", summary.kappa);
    emit("tau_eps", summary.tau_eps);
    for (std::size_t k = 0; k < summary.eps.size(); ++k) emit("eps_" + std::to_string(k + 1), summary.eps[k]);
    const char* sigma_names[] = {"sigma_11", "sigma_22", "sigma_33", "sigma_12", "sigma_13", "sigma_23"};
    for (int k = 0; k < 6; ++k) emit(sigma_names[k], summary.sigma[static_cast<std::size_t>(k)]);
    write_file_atomic(dir / "parameters.csv", os.str());
    files.push_back("parameters.csv");
  }

  {
    // Coefficients on the standardised and the raw covariate scale.
    const auto post = chain.posterior_samples();
    std::vector<std::vector<double>> raw(static_cast<std::size_t>(design.n_beta()));
    for (const ChainSample* s : post) {
      const Eigen::VectorXd b = design.beta_raw_scale(s->latent.beta);
      for (Index j = 0; j < b.size(); ++j) raw[static_cast<std::size_t>(j)].push_back(b(j));
    }
    std::ostringstream os;
    os << "field,term,mean,q025,q975,mean_raw,q025_raw,q975_raw\n";
    const char* field_names[] = {"eta_L1", "eta_L2", "eta_H"};
    for (int f = 0; f < kFields; ++f) {
      const auto& terms = design.field_terms()[static_cast<std::size_t>(f)];
      for (std::size_t t = 0; t < terms.size(); ++t) {
        const auto j = static_cast<std::size_t>(design.beta_offset(f)) + t;
        const Interval std_iv = summary.beta[j];
        const Interval raw_iv = summarize_draws(raw[j]);
        os << field_names[f] << ',' << terms[t] << ',' << format_double(std_iv.mean) << ','
           << format_double(std_iv.lower) << ',' << format_double(std_iv.upper) << ','
           << format_double(raw_iv.mean) << ',' << format_double(raw_iv.lower) << ','
           << format_double(raw_iv.upper) << '\n';
      }
    }
    write_file_atomic(dir / "beta.csv", os.str());
    files.push_back("beta.csv");
  }

  {
    std::ostringstream os;
    os << "index,r,g,b\n";
    for (int i = 0; i < 256; ++i) {
      const auto c = colormap_entry(i);
      os << i << ',' << c(0) << ',' << c(1) << ',' << c(2) << '\n';
    }
    write_file_atomic(dir / "colormap.csv", os.str());
    files.push_back("colormap.csv");
  }

  const Index n = lattice.size();
  const auto field = [&](auto get) {
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = get(rows[static_cast<std::size_t>(i)]);
    return v;
  };
  const std::vector<std::pair<std::string, Eigen::VectorXd>> maps = {
      {"p_C", field([](const SummaryRow& r) { return r.p_natural(0); })},
      {"p_B", field([](const SummaryRow& r) { return r.p_natural(1); })},
      {"p_U", field([](const SummaryRow& r) { return r.p_natural(2); })},
      {"p_H", field([](const SummaryRow& r) { return r.p_human; })},
      {"z_C", field([](const SummaryRow& r) { return r.cover(0); })},
      {"z_B", field([](const SummaryRow& r) { return r.cover(1); })},
      {"z_U", field([](const SummaryRow& r) { return r.cover(2); })},
      {"p_H_q025", field([](const SummaryRow& r) { return r.p_human_q025; })},
      {"p_H_q975", field([](const SummaryRow& r) { return r.p_human_q975; })},
  };
  for (const auto& [name, values] : maps) {
    write_heatmap(values, lattice, 0.0, 1.0, dir / (name + ".ppm"));
    files.push_back(name + ".ppm");
  }
  return files;
}

}  // namespace lcrecon
