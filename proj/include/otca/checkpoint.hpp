#pragma once

// Model checkpoint, a line-oriented text file:
//
//   OTCA-FLOW-CHECKPOINT <version>
//   dim <d>
//   conditions <C>
//   hidden <n> <w1> ... <wn>
//   schedule <eta> <scaled|constant> <cap> <delta>
//   params <N>
//   <p_0>
//   ...
//   <p_{N-1}>
//
// Parameters and schedule constants are written as C99 hex floats so a
// save/load cycle is bit-exact.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "otca/error.hpp"
#include "otca/flow_env.hpp"

namespace otca::flow {

inline constexpr const char* kCheckpointMagic = "OTCA-FLOW-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  VelocityNet net;
  NoiseSchedule schedule;
};

namespace detail {

inline std::string hex(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

inline double parse_real(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw Error("checkpoint: bad number '" + s + "'");
  return v;
}

inline void expect(std::istream& in, const std::string& key) {
  std::string got;
  if (!(in >> got) || got != key) throw Error("checkpoint: expected '" + key + "'");
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const VelocityNet& net, const NoiseSchedule& schedule) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "dim " << net.dim() << '\n';
  out << "conditions " << net.conditions() << '\n';
  out << "hidden " << net.hidden().size();
  for (auto h : net.hidden()) out << ' ' << h;
  out << '\n';
  out << "schedule " << detail::hex(schedule.eta) << ' '
      << (schedule.form == NoiseForm::kScaled ? "scaled" : "constant") << ' '
      << detail::hex(schedule.cap) << ' ' << detail::hex(schedule.delta) << '\n';
  out << "params " << net.parameter_count() << '\n';
  for (double p : net.parameters()) out << detail::hex(p) << '\n';
}

inline Checkpoint read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic)
    throw Error("checkpoint: missing magic header");
  if (version != kCheckpointVersion)
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  std::size_t dim = 0, conditions = 0, layers = 0;
  detail::expect(in, "dim");
  in >> dim;
  detail::expect(in, "conditions");
  in >> conditions;
  detail::expect(in, "hidden");
  in >> layers;
  std::vector<std::size_t> hidden(layers);
  for (auto& h : hidden) in >> h;
  if (!in) throw Error("checkpoint: malformed shape section");

  Checkpoint ck;
  std::string eta, form, cap, delta;
  detail::expect(in, "schedule");
  if (!(in >> eta >> form >> cap >> delta)) throw Error("checkpoint: malformed schedule");
  ck.schedule.eta = detail::parse_real(eta);
  if (form == "scaled") {
    ck.schedule.form = NoiseForm::kScaled;
  } else if (form == "constant") {
    ck.schedule.form = NoiseForm::kConstant;
  } else {
    throw Error("checkpoint: unknown noise form '" + form + "'");
  }
  ck.schedule.cap = detail::parse_real(cap);
  ck.schedule.delta = detail::parse_real(delta);

  ck.net = VelocityNet(dim, conditions, hidden);
  std::size_t count = 0;
  detail::expect(in, "params");
  in >> count;
  if (!in || count != ck.net.parameter_count())
    throw Error("checkpoint: parameter count does not match layer shapes");
  auto params = ck.net.parameters();
  std::string tok;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> tok)) throw Error("checkpoint: truncated parameter list");
    params[i] = detail::parse_real(tok);
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const VelocityNet& net,
                            const NoiseSchedule& schedule) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  write_checkpoint(out, net, schedule);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace otca::flow
