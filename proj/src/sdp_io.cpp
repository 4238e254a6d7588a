#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pie/sdp.hpp"

namespace pie::sdp {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// Layout: comment lines, m, nblocks, block sizes (negative = diagonal), b, then
// "matno block i j value" with 1-based indices. Matrix 0 is F0 = -C so that the
// file reads as SDPA's max <F0, Y> s.t. <F_r, Y> = b_r.
void write_sdpa(const SDPProblem& prob, std::ostream& out) {
  SDPProblem p = prob;
  p.validate();
  p.normalize();
  out << "\"pie sdp export\n";
  std::string pairs;
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    if (p.blocks[k].kind == BlockKind::FREE) pairs += " " + std::to_string(k + 1);
  if (!pairs.empty()) out << "*free-pairs" << pairs << "\n";
  out << p.num_constraints() << "\n" << p.blocks.size() << "\n";
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    const auto& bl = p.blocks[k];
    out << (k ? " " : "") << (bl.kind == BlockKind::PSD ? bl.size : -2 * bl.size);
  }
  out << "\n";
  for (int r = 0; r < p.num_constraints(); ++r) out << (r ? " " : "") << fmt(p.b[r]);
  out << "\n";
  auto emit = [&](int matno, const Entry& e, double v) {
    const auto& bl = p.blocks[e.block];
    out << matno << " " << e.block + 1 << " " << e.i + 1 << " " << e.j + 1 << " " << fmt(v) << "\n";
    if (bl.kind == BlockKind::FREE)
      out << matno << " " << e.block + 1 << " " << bl.size + e.i + 1 << " " << bl.size + e.j + 1 << " " << fmt(-v)
          << "\n";
  };
  for (const auto& e : p.C) emit(0, e, -e.v);
  for (const auto& e : p.A) emit(e.row + 1, e, e.v);
}

void write_sdpa(const SDPProblem& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_sdpa(p, out);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

SDPProblem read_sdpa(std::istream& in) {
  std::set<int> free_blocks;
  std::string body, line;
  while (std::getline(in, line)) {
    if (!line.empty() && (line[0] == '"' || line[0] == '*')) {
      if (line.rfind("*free-pairs", 0) == 0) {
        std::istringstream ss(line.substr(11));
        int k;
        while (ss >> k) free_blocks.insert(k - 1);
      }
      continue;
    }
    for (char& c : line)
      if (c == ',' || c == '{' || c == '}' || c == '(' || c == ')') c = ' ';
    body += line + "\n";
  }
  std::istringstream ts(body);
  auto next = [&](const char* what) {
    std::string tok;
    if (!(ts >> tok)) throw std::invalid_argument(std::string("sdpa: unexpected end of file reading ") + what);
    return tok;
  };
  auto to_int = [&](const std::string& t) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw std::invalid_argument("sdpa: bad integer '" + t + "'");
    return v;
  };
  auto to_double = [&](const std::string& t) {
    std::size_t used = 0;
    double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument("sdpa: bad number '" + t + "'");
    return v;
  };

  SDPProblem p;
  const int m = to_int(next("m"));
  const int nb = to_int(next("nblocks"));
  for (int k = 0; k < nb; ++k) {
    int s = to_int(next("block size"));
    if (free_blocks.count(k)) {
      if (s >= 0 || s % 2) throw std::invalid_argument("sdpa: free-pair block must be diagonal of even size");
      p.add_block(BlockKind::FREE, -s / 2);
    } else {
      // Diagonal blocks without the free-pair marker are read as PSD with
      // diagonal data.
      p.add_block(BlockKind::PSD, s < 0 ? -s : s);
    }
  }
  for (int r = 0; r < m; ++r) p.add_row(to_double(next("b")));
  std::string tok;
  while (ts >> tok) {
    int matno = to_int(tok);
    int blk = to_int(next("block")) - 1;
    int i = to_int(next("i")) - 1;
    int j = to_int(next("j")) - 1;
    double v = to_double(next("value"));
    if (matno < 0 || matno > m || blk < 0 || blk >= nb) throw std::invalid_argument("sdpa: entry index out of range");
    const Block& bl = p.blocks[blk];
    if (bl.kind == BlockKind::FREE) {
      if (i != j || i < 0 || i >= 2 * bl.size) throw std::invalid_argument("sdpa: bad free-pair entry");
      if (i >= bl.size) continue;  // mirror of the negative part
    }
    if (matno == 0) p.add_objective(blk, i, j, -v);
    else p.add(matno - 1, blk, i, j, v);
  }
  p.validate();
  p.normalize();
  return p;
}

SDPProblem read_sdpa(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_sdpa(in);
}

std::uint64_t constraint_hash(const SDPProblem& prob) {
  SDPProblem p = prob;
  p.normalize();
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
      h ^= (v >> (8 * k)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (const auto& bl : p.blocks) {
    mix(static_cast<std::uint64_t>(bl.kind));
    mix(static_cast<std::uint64_t>(bl.size));
  }
  for (double v : p.b) mix(std::bit_cast<std::uint64_t>(v));
  for (const auto& e : p.A) {
    mix(static_cast<std::uint64_t>(e.row));
    mix(static_cast<std::uint64_t>(e.block));
    mix(static_cast<std::uint64_t>(e.i));
    mix(static_cast<std::uint64_t>(e.j));
    mix(std::bit_cast<std::uint64_t>(e.v));
  }
  return h;
}

}  // namespace pie::sdp
