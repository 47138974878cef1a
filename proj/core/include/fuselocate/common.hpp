/*
 * Copyright 2026 The FuseLocate Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FUSELOCATE_COMMON_HPP_
#define FUSELOCATE_COMMON_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace fuselocate {

// Error categories map one-to-one onto the CLI exit codes.
enum class ErrorKind {
  kInvalidArgument,
  kConfig,
  kIo,
  kMissingDependency,
  kNumerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::kInvalidArgument, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class MissingArtifactError : public Error {
 public:
  explicit MissingArtifactError(const std::string& what)
      : Error(ErrorKind::kMissingDependency, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::kNumerical, what) {}
};

// Process exit code for an error category: 2 config, 3 IO, 4 missing
// dependency, 5 numerical failure. Plain invalid arguments count as config.
int exit_code_for(ErrorKind kind);

using Rng = std::mt19937_64;

// Derives an independent stream seed from a master seed and a path of
// stream identifiers (run index, stage, ...). Stable across platforms.
std::uint64_t derive_seed(std::uint64_t master_seed,
                          std::initializer_list<std::uint64_t> stream);

inline Rng make_rng(std::uint64_t master_seed,
                    std::initializer_list<std::uint64_t> stream) {
  return Rng(derive_seed(master_seed, stream));
}

}  // namespace fuselocate

#endif  // FUSELOCATE_COMMON_HPP_
