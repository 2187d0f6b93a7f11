/* Copyright 2026 The Lynx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace lynx {

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

struct ModelMismatch : std::logic_error {
  explicit ModelMismatch(const std::string& what) : std::logic_error(what) {}
};

struct TooLarge : std::runtime_error {
  explicit TooLarge(const std::string& what) : std::runtime_error(what) {}
};

struct BudgetTooSmall : std::runtime_error {
  explicit BudgetTooSmall(const std::string& what) : std::runtime_error(what) {}
};

struct BudgetInfeasible : std::runtime_error {
  explicit BudgetInfeasible(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyGraph : std::runtime_error {
  explicit EmptyGraph(const std::string& what) : std::runtime_error(what) {}
};

struct WindowConfigError : std::runtime_error {
  explicit WindowConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RoleMismatch : std::logic_error {
  explicit RoleMismatch(const std::string& what) : std::logic_error(what) {}
};

struct NoValidPartition : std::runtime_error {
  explicit NoValidPartition(const std::string& what) : std::runtime_error(what) {}
};

struct InconsistentPlan : std::runtime_error {
  explicit InconsistentPlan(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lynx
