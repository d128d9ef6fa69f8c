// Copyright 2026 The floquet_lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace floquet_lab {

enum class ErrorKind {
  kInvalidTruncation,
  kNumeric,
  kIntegration,
  kResonantTime,
  kResonance,
  kDomain,
  kUnsupportedDrive,
  kInvalidInterval,
  kIndex,
  kInvalidInput,
  kSmallDenominator,
  kConfig,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidTruncation: return "invalid_truncation";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kIntegration: return "integration";
    case ErrorKind::kResonantTime: return "resonant_time";
    case ErrorKind::kResonance: return "resonance";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kUnsupportedDrive: return "unsupported_drive";
    case ErrorKind::kInvalidInterval: return "invalid_interval";
    case ErrorKind::kIndex: return "index";
    case ErrorKind::kInvalidInput: return "invalid_input";
    case ErrorKind::kSmallDenominator: return "small_denominator";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Homological solve hit a denominator below the guard.  Indices refer to the
// Fourier offset q and the level-space basis states a, b.
class SmallDenominatorError : public Error {
 public:
  SmallDenominatorError(int q, long a, long b, double gap, bool dressed)
      : Error(ErrorKind::kSmallDenominator,
              "small denominator at q=" + std::to_string(q) + " a=" +
                  std::to_string(a) + " b=" + std::to_string(b) +
                  " gap=" + std::to_string(gap)),
        q_(q), a_(a), b_(b), gap_(gap), dressed_(dressed) {}

  int q() const noexcept { return q_; }
  long a() const noexcept { return a_; }
  long b() const noexcept { return b_; }
  double gap() const noexcept { return gap_; }
  bool dressed() const noexcept { return dressed_; }

 private:
  int q_;
  long a_;
  long b_;
  double gap_;
  bool dressed_;
};

}  // namespace floquet_lab
