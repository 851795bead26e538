#pragma once

// Readers and writers for problem files and solve results.
//
// Native format: one JSON object
//   {
//     "blocks": [{"kind": "sdp"|"soc"|"lin"|"free", "dim": n, "barrier": nu}, ...],
//     "b": [b1, ..., bm],
//     "C": [C1, ..., Cp],
//     "A": [[A1_1, ..., A1_m], ..., [Ap_1, ..., Ap_m]]
//   }
// SDP payloads are lists of 1-based [i, j, value] triplets for the upper
// triangle; the lower triangle is mirrored. Other payloads are dense arrays
// of length dim. "barrier" defaults to 0.

#include "sqlp/problem.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sqlp::io {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line);
  /// 1-based line of the offending input, 0 when unknown.
  int line() const { return line_; }

 private:
  int line_;
};

ProblemData parse_native(std::string_view text,
                         std::vector<std::string>* warnings = nullptr);
std::string serialize_native(const ProblemData& p);

/// SDPA sparse format. SDPA's dual "max tr(F0 Y) s.t. tr(Fi Y) = ci" is read
/// as C = -F0, a_i = -F_i, b = -c so that the SDPA dual becomes (P).
ProblemData parse_sdpa(std::string_view text,
                       std::vector<std::string>* warnings = nullptr);

enum class Format { Auto, Sdpa, Native };

Format format_for_path(const std::filesystem::path& path);
ProblemData load_problem(const std::filesystem::path& path, Format format,
                         std::vector<std::string>* warnings = nullptr);

std::string result_to_json(const SolveResult& r, const std::vector<BlockSpec>& specs);
SolveResult result_from_json(std::string_view text, std::vector<BlockSpec>* specs = nullptr);

}  // namespace sqlp::io
