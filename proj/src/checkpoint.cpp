#include "lcrecon/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "lcrecon/error.hpp"

namespace lcrecon {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'L', 'C', 'R', 'C', 'H', 'A', 'I', 'N'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void text(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.append(s);
  }
  void vec(const Eigen::VectorXd& v) {
    pod<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) pod(v(i));
  }
  void bytes(const std::vector<std::uint8_t>& v) {
    pod<std::uint64_t>(v.size());
    out_.append(reinterpret_cast<const char*>(v.data()), v.size());
  }
  void doubles(const std::vector<double>& v) {
    pod<std::uint64_t>(v.size());
    for (double d : v) pod(d);
  }
  std::string& buffer() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::uint64_t count(std::size_t elem_size) {
    const auto n = pod<std::uint64_t>();
    if (elem_size > 0 && n > (in_.size() - pos_) / elem_size) fail("length field exceeds file size");
    return n;
  }
  std::string text() {
    const auto n = count(1);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Eigen::VectorXd vec() {
    const auto n = count(sizeof(double));
    Eigen::VectorXd v(static_cast<Index>(n));
    for (Index i = 0; i < v.size(); ++i) v(i) = pod<double>();
    return v;
  }
  std::vector<std::uint8_t> bytes() {
    const auto n = count(1);
    std::vector<std::uint8_t> v(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return v;
  }
  std::vector<double> doubles() {
    const auto n = count(sizeof(double));
    std::vector<double> v(n);
    for (auto& d : v) d = pod<double>();
    return v;
  }
  std::size_t position() const { return pos_; }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("checkpoint: " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) fail("truncated file");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

void write_stats(Writer& w, const BlockStats& s) {
  w.pod(s.proposed);
  w.pod(s.accepted);
  w.pod(s.proposed_after_burn_in);
  w.pod(s.accepted_after_burn_in);
  w.pod(s.failures);
}

BlockStats read_stats(Reader& r) {
  BlockStats s;
  s.proposed = r.pod<std::uint64_t>();
  s.accepted = r.pod<std::uint64_t>();
  s.proposed_after_burn_in = r.pod<std::uint64_t>();
  s.accepted_after_burn_in = r.pod<std::uint64_t>();
  s.failures = r.pod<std::uint64_t>();
  return s;
}

}  // namespace

std::string encode_chain(const ChainOutput& c) {
  Writer w;
  w.buffer().append(kMagic, sizeof(kMagic));
  w.pod(kCheckpointVersion);
  w.pod(c.seed);
  w.pod(c.config_fingerprint);
  w.text(c.rng_state);
  w.pod<std::int64_t>(c.n_rows);
  w.pod<std::int64_t>(c.n_cols);
  w.pod<std::int32_t>(c.n_datasets);
  for (const auto& terms : c.field_terms) {
    w.pod<std::uint64_t>(terms.size());
    for (const auto& t : terms) w.text(t);
  }
  w.pod<std::uint64_t>(c.group_names.size());
  for (const auto& g : c.group_names) w.text(g);

  const SamplerConfig& cfg = c.config;
  w.pod<std::int64_t>(cfg.iterations);
  w.pod<std::int64_t>(cfg.burn_in);
  w.pod<std::int64_t>(cfg.thin);
  w.pod<std::int64_t>(cfg.precond_interval);
  w.pod(cfg.precond_fraction);
  w.pod(cfg.schedule.c);
  w.pod(cfg.schedule.gamma);
  w.pod(cfg.target_mala);
  w.pod(cfg.target_rw);
  w.pod(cfg.initial_step_mala.value_or(std::numeric_limits<double>::quiet_NaN()));
  w.pod(cfg.initial_step_rw);
  for (bool b : {cfg.update.kappa, cfg.update.sigma, cfg.update.tau_eps, cfg.update.horseshoe,
                 cfg.update.concentration, cfg.update.offsets}) {
    w.pod<std::uint8_t>(b ? 1 : 0);
  }

  w.pod<std::int64_t>(c.completed_iterations);
  write_stats(w, c.mala);
  write_stats(w, c.rw);
  w.bytes(c.mala_accepted);
  w.bytes(c.rw_accepted);
  w.doubles(c.log_step_mala);
  w.doubles(c.log_step_rw);

  w.pod<std::uint64_t>(c.samples.size());
  for (const auto& s : c.samples) {
    w.pod<std::int64_t>(s.iteration);
    w.pod(s.log_posterior);
    w.pod<std::int64_t>(s.latent.eta.cols());
    for (Index i = 0; i < s.latent.eta.size(); ++i) w.pod(s.latent.eta.data()[i]);
    w.vec(s.latent.beta);
    w.vec(s.latent.eps);
    w.pod(s.latent.log_alpha);
    w.pod(s.latent.log_lambda);
    w.pod(s.hyper.kappa);
    for (Index i = 0; i < 9; ++i) w.pod(s.hyper.sigma.data()[i]);
    w.pod(s.hyper.tau_eps);
    w.vec(s.hyper.horseshoe.gamma);
    w.vec(s.hyper.horseshoe.nu);
    w.pod(s.hyper.horseshoe.phi);
    w.pod(s.hyper.horseshoe.xi);
  }
  const std::uint64_t checksum = fnv1a(w.buffer().data(), w.buffer().size());
  w.pod(checksum);
  return std::move(w.buffer());
}

ChainOutput decode_chain(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint: not a chain file (bad magic)");
  }
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != fnv1a(bytes.data(), body)) throw DataError("checkpoint: checksum mismatch");

  const std::string payload = bytes.substr(0, body);
  Reader r(payload);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.pod<char>();
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(version));
  }
  ChainOutput c;
  c.seed = r.pod<std::uint64_t>();
  c.config_fingerprint = r.pod<std::uint64_t>();
  c.rng_state = r.text();
  c.n_rows = r.pod<std::int64_t>();
  c.n_cols = r.pod<std::int64_t>();
  c.n_datasets = r.pod<std::int32_t>();
  if (c.n_rows < 1 || c.n_cols < 1 || c.n_datasets < 1) r.fail("invalid dimensions");
  for (auto& terms : c.field_terms) {
    const auto n = r.count(8);
    for (std::uint64_t i = 0; i < n; ++i) terms.push_back(r.text());
  }
  const auto n_groups = r.count(8);
  for (std::uint64_t i = 0; i < n_groups; ++i) c.group_names.push_back(r.text());

  SamplerConfig& cfg = c.config;
  cfg.iterations = r.pod<std::int64_t>();
  cfg.burn_in = r.pod<std::int64_t>();
  cfg.thin = r.pod<std::int64_t>();
  cfg.precond_interval = r.pod<std::int64_t>();
  cfg.precond_fraction = r.pod<double>();
  cfg.schedule.c = r.pod<double>();
  cfg.schedule.gamma = r.pod<double>();
  cfg.target_mala = r.pod<double>();
  cfg.target_rw = r.pod<double>();
  const double step = r.pod<double>();
  if (!std::isnan(step)) cfg.initial_step_mala = step;
  cfg.initial_step_rw = r.pod<double>();
  cfg.update.kappa = r.pod<std::uint8_t>() != 0;
  cfg.update.sigma = r.pod<std::uint8_t>() != 0;
  cfg.update.tau_eps = r.pod<std::uint8_t>() != 0;
  cfg.update.horseshoe = r.pod<std::uint8_t>() != 0;
  cfg.update.concentration = r.pod<std::uint8_t>() != 0;
  cfg.update.offsets = r.pod<std::uint8_t>() != 0;

  c.completed_iterations = r.pod<std::int64_t>();
  c.mala = read_stats(r);
  c.rw = read_stats(r);
  c.mala_accepted = r.bytes();
  c.rw_accepted = r.bytes();
  c.log_step_mala = r.doubles();
  c.log_step_rw = r.doubles();

  const Index n_cells = c.n_rows * c.n_cols;
  const auto n_samples = r.count(8);
  c.samples.reserve(n_samples);
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    ChainSample s;
    s.iteration = r.pod<std::int64_t>();
    s.log_posterior = r.pod<double>();
    const auto cols = r.pod<std::int64_t>();
    if (cols != n_cells) r.fail("sample field size does not match lattice");
    s.latent.eta.resize(3, n_cells);
    for (Index k = 0; k < s.latent.eta.size(); ++k) s.latent.eta.data()[k] = r.pod<double>();
    s.latent.beta = r.vec();
    s.latent.eps = r.vec();
    s.latent.log_alpha = r.pod<double>();
    s.latent.log_lambda = r.pod<double>();
    s.hyper.kappa = r.pod<double>();
    for (Index k = 0; k < 9; ++k) s.hyper.sigma.data()[k] = r.pod<double>();
    s.hyper.tau_eps = r.pod<double>();
    s.hyper.horseshoe.gamma = r.vec();
    s.hyper.horseshoe.nu = r.vec();
    s.hyper.horseshoe.phi = r.pod<double>();
    s.hyper.horseshoe.xi = r.pod<double>();
    c.samples.push_back(std::move(s));
  }
  if (r.position() != payload.size()) r.fail("trailing bytes");
  return c;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

void write_chain(const ChainOutput& chain, const std::filesystem::path& path) {
  write_file_atomic(path, encode_chain(chain));
}

ChainOutput read_chain(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_chain(ss.str());
}

}  // namespace lcrecon
