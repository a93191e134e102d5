#ifndef GFLAB_IO_HPP
#define GFLAB_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "analytics.hpp"
#include "cell_system.hpp"
#include "errors.hpp"
#include "level_cut.hpp"
#include "sampling.hpp"

namespace gflab {

using Json = nlohmann::ordered_json;

/// 17 significant digits, so that every double round-trips.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv_row(std::ostream& os, const std::vector<double>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << ',';
    os << fmt17(row[i]);
  }
  os << '\n';
}

inline void write_path_csv(std::ostream& os, const ExcursionPath& p) {
  os << "t,x,y\n";
  for (std::size_t i = 0; i < p.size(); ++i) write_csv_row(os, {p.times[i], p.x[i], p.y[i]});
}

inline Json fragment_record(std::size_t excursion_id, const FragmentSet& fs) {
  Json j;
  j["excursion_id"] = excursion_id;
  j["level"] = fs.level;
  j["sizes"] = fs.sizes;
  j["n_fragments"] = fs.sizes.size();
  return j;
}

inline Json snapshot_record(std::size_t system_id, const Snapshot& s) {
  Json j;
  j["excursion_id"] = system_id;
  j["level"] = s.level;
  j["sizes"] = s.sizes;
  j["n_fragments"] = s.sizes.size();
  return j;
}

inline void write_jsonl(std::ostream& os, const Json& j) { os << j.dump() << '\n'; }

inline void write_cells_jsonl(std::ostream& os, const CellSystem& cs) {
  for (const Cell& c : cs.cells) {
    Json j;
    j["label"] = c.label_string();
    j["b_u"] = c.birth_level;
    j["size0"] = c.birth_size;
    j["zeta_u"] = c.lifetime;
    j["censored"] = c.censored;
    write_jsonl(os, j);
  }
}

inline void write_xi_csv(std::ostream& os, std::ostream& jumps, const LocallyLargestPath& ll) {
  os << "a,xi\n";
  for (std::size_t i = 0; i < ll.levels.size(); ++i) write_csv_row(os, {ll.levels[i], ll.values[i]});
  jumps << "a_i,z_i\n";
  for (const auto& j : ll.jumps) write_csv_row(jumps, {j.level, j.size});
}

/// Reads a one-column CSV with header `q`.
inline std::vector<double> read_q_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("q csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "q") throw ConfigError("q csv: header must be 'q'");
  std::vector<double> q;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t used = 0;
    double v;
    try {
      v = std::stod(line, &used);
    } catch (const std::exception&) {
      throw ConfigError("q csv: bad value '" + line + "'");
    }
    if (used != line.size()) throw ConfigError("q csv: bad value '" + line + "'");
    q.push_back(v);
  }
  return q;
}

inline void write_psi_csv(std::ostream& os, const std::vector<double>& q, const LevyConfig& cfg = {}) {
  os << "q,psi\n";
  for (double v : q) write_csv_row(os, {v, psi(v, cfg)});
}

inline void write_kappa_csv(std::ostream& os, const CumulantGrid& g) {
  os << "q,kappa_numeric,kappa_closed\n";
  for (std::size_t i = 0; i < g.q.size(); ++i)
    write_csv_row(os, {g.q[i], g.kappa_numeric[i], g.kappa_closed[i]});
}

inline void write_rc_csv(std::ostream& os, double C, std::size_t n = 199) {
  os << "z,RC\n";
  for (std::size_t i = 1; i <= n; ++i) {
    const double z = -0.5 * C + C * static_cast<double>(i) / static_cast<double>(n + 1);
    if (z == 0.0) continue;
    write_csv_row(os, {z, green_RC(z, C)});
  }
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericFailure("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string sha256_file(const std::filesystem::path& p) { return sha256_hex(read_file(p)); }

}  // namespace gflab

#endif  // GFLAB_IO_HPP
