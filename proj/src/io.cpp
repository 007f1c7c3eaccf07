#include "twins/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "twins/error.hpp"

namespace twins::io {

std::string Provenance::line() const {
  return "# scenario_hash=" + scenario_hash + " seed=" + std::to_string(seed);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

std::string fmt_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Streams data rows of a CSV file written by this module, checking the header.
class TableReader {
 public:
  TableReader(const std::filesystem::path& path, const std::string& header, Provenance* prov)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw ConfigError("cannot open file", 0, path.string());
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.rfind("# scenario_hash=", 0) == 0) {
        if (prov) parse_provenance(line, *prov);
        continue;
      }
      if (line.rfind('#', 0) == 0) {
        comments_.push_back(line);
        continue;
      }
      if (line != header) fail("expected header \"" + header + "\"");
      return;
    }
    fail("missing header \"" + header + "\"");
  }

  bool next(std::vector<std::string>& cells, std::size_t columns) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.empty()) continue;
      cells = split(line);
      if (cells.size() != columns) fail("expected " + std::to_string(columns) + " columns");
      return true;
    }
    return false;
  }

  double number(const std::string& s) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      fail("not a number: \"" + s + "\"");
    }
  }

  long integer(const std::string& s) const {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("not an integer: \"" + s + "\"");
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(msg, line_no_, path_.string()); }

  const std::vector<std::string>& comments() const { return comments_; }

 private:
  void parse_provenance(const std::string& line, Provenance& prov) const {
    std::istringstream in(line.substr(2));
    std::string tok;
    while (in >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "scenario_hash") prov.scenario_hash = val;
      if (key == "seed") prov.seed = std::stoull(val);
    }
  }

  std::filesystem::path path_;
  std::ifstream in_;
  int line_no_ = 0;
  std::vector<std::string> comments_;
};

const char* kEventsHeader = "t_s,twin_id,kind";
const char* kTruthHeader = "t_s,x,y";
const char* kTraceHeader = "t_s,reader,twin_id,p_tx_dbm,outcome,interval,round";
const char* kFingerprintHeader = "cell,twin,bin,probability";

}  // namespace

void write_table(const std::filesystem::path& path, const Provenance& prov, const std::string& header,
                 const std::vector<std::vector<std::string>>& rows) {
  auto out = open_out(path);
  out << prov.line() << '\n' << header << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

void write_events(const std::filesystem::path& path, const Provenance& prov,
                  const std::vector<env::StateJumpEvent>& events) {
  auto out = open_out(path);
  out << prov.line() << '\n' << kEventsHeader << '\n';
  for (const auto& e : events) out << fmt(e.t) << ',' << e.twin_id << ',' << env::event_kind_name(e.kind) << '\n';
}

void write_truth(const std::filesystem::path& path, const Provenance& prov,
                 const std::vector<env::TruthSample>& truth) {
  auto out = open_out(path);
  out << prov.line() << '\n' << kTruthHeader << '\n';
  for (const auto& s : truth) out << fmt(s.t) << ',' << fmt(s.position.x) << ',' << fmt(s.position.y) << '\n';
}

void write_trace(const std::filesystem::path& path, const Provenance& prov,
                 const std::vector<env::QueryRecord>& trace) {
  auto out = open_out(path);
  out << prov.line() << '\n' << kTraceHeader << '\n';
  for (const auto& q : trace) {
    out << fmt(q.t) << ',' << q.reader << ',' << q.twin << ',' << fmt(q.p_tx) << ','
        << env::outcome_name(q.outcome) << ',' << q.interval << ',' << q.round << '\n';
  }
}

void write_fingerprint(const std::filesystem::path& path, const Provenance& prov,
                       const tracker::Fingerprint& fp) {
  auto out = open_out(path);
  const auto& m = fp.meta();
  out << prov.line() << '\n';
  out << "# fingerprint version=1 cells=" << fp.cells() << " dt=" << fmt_exact(m.dt)
      << " radius=" << fmt_exact(m.radius) << " runs=" << m.runs << " n_max=" << m.n_max
      << " alpha=" << fmt_exact(m.alpha) << '\n';
  out << kFingerprintHeader << '\n';
  const auto bg = fp.background();
  for (std::size_t b = 0; b < bg.size(); ++b) out << "-1,-1," << b << ',' << fmt_exact(bg[b]) << '\n';
  for (int c = 0; c < fp.cells(); ++c) {
    for (int t : fp.twins_of(c)) {
      const auto h = fp.histogram(c, t);
      for (std::size_t b = 0; b < h.size(); ++b) {
        out << c << ',' << t << ',' << b << ',' << fmt_exact(h[b]) << '\n';
      }
    }
  }
}

std::vector<env::TruthSample> read_truth(const std::filesystem::path& path, Provenance* prov) {
  TableReader in(path, kTruthHeader, prov);
  std::vector<env::TruthSample> out;
  std::vector<std::string> c;
  while (in.next(c, 3)) out.push_back({in.number(c[0]), {in.number(c[1]), in.number(c[2])}});
  return out;
}

std::vector<env::QueryRecord> read_trace(const std::filesystem::path& path, Provenance* prov) {
  TableReader in(path, kTraceHeader, prov);
  std::vector<env::QueryRecord> out;
  std::vector<std::string> c;
  while (in.next(c, 7)) {
    env::QueryRecord q;
    q.t = in.number(c[0]);
    q.reader = static_cast<int>(in.integer(c[1]));
    q.twin = static_cast<int>(in.integer(c[2]));
    q.p_tx = in.number(c[3]);
    bool known = false;
    for (auto o : {env::QueryOutcome::Jumping, env::QueryOutcome::Quiescent,
                   env::QueryOutcome::NotInCriticalState}) {
      if (c[4] == env::outcome_name(o)) {
        q.outcome = o;
        known = true;
      }
    }
    if (!known) in.fail("unknown outcome \"" + c[4] + "\"");
    q.interval = static_cast<int>(in.integer(c[5]));
    q.round = static_cast<int>(in.integer(c[6]));
    out.push_back(q);
  }
  return out;
}

std::vector<env::StateJumpEvent> read_events(const std::filesystem::path& path, Provenance* prov) {
  TableReader in(path, kEventsHeader, prov);
  std::vector<env::StateJumpEvent> out;
  std::vector<std::string> c;
  while (in.next(c, 3)) {
    env::StateJumpEvent e;
    e.t = in.number(c[0]);
    e.twin_id = static_cast<int>(in.integer(c[1]));
    if (c[2] == env::event_kind_name(env::EventKind::Jump)) {
      e.kind = env::EventKind::Jump;
    } else if (c[2] == env::event_kind_name(env::EventKind::Restore)) {
      e.kind = env::EventKind::Restore;
    } else {
      in.fail("unknown event kind \"" + c[2] + "\"");
    }
    out.push_back(e);
  }
  return out;
}

tracker::Fingerprint read_fingerprint(const std::filesystem::path& path, Provenance* prov) {
  TableReader in(path, kFingerprintHeader, prov);
  std::map<std::string, std::string> meta;
  for (const auto& line : in.comments()) {
    if (line.rfind("# fingerprint ", 0) != 0) continue;
    std::istringstream s(line.substr(14));
    std::string tok;
    while (s >> tok) {
      const auto eq = tok.find('=');
      if (eq != std::string::npos) meta[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  for (const char* k : {"version", "cells", "dt", "radius", "runs", "n_max", "alpha"}) {
    if (!meta.count(k)) throw ConfigError(std::string("fingerprint metadata lacks ") + k, 0, path.string());
  }
  if (meta["version"] != "1") throw ConfigError("unsupported fingerprint version", 0, path.string());
  tracker::FingerprintMeta m;
  m.dt = in.number(meta["dt"]);
  m.radius = in.number(meta["radius"]);
  m.runs = static_cast<int>(in.integer(meta["runs"]));
  m.n_max = static_cast<int>(in.integer(meta["n_max"]));
  m.alpha = in.number(meta["alpha"]);
  const long cells = in.integer(meta["cells"]);
  tracker::Fingerprint fp(m, static_cast<int>(cells));

  const std::size_t bins = static_cast<std::size_t>(m.n_max + 1);
  std::vector<double> hist;
  long cur_cell = -2;
  long cur_twin = -2;
  auto flush = [&] {
    if (hist.empty()) return;
    if (hist.size() != bins) in.fail("histogram has " + std::to_string(hist.size()) + " bins");
    if (cur_cell == -1) {
      fp.set_background(hist);
    } else {
      fp.set_histogram(static_cast<int>(cur_cell), static_cast<int>(cur_twin), hist);
    }
    hist.clear();
  };
  std::vector<std::string> c;
  while (in.next(c, 4)) {
    const long cell = in.integer(c[0]);
    const long twin = in.integer(c[1]);
    const long bin = in.integer(c[2]);
    if (cell < -1 || cell >= cells) in.fail("cell out of range");
    if (cell != cur_cell || twin != cur_twin) {
      flush();
      cur_cell = cell;
      cur_twin = twin;
    }
    if (bin != static_cast<long>(hist.size())) in.fail("bins must be listed in order from 0");
    hist.push_back(in.number(c[3]));
  }
  flush();
  return fp;
}

}  // namespace twins::io
