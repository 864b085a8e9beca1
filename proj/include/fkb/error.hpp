// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fkb {

enum class Errc {
  // core model
  TypeMismatch,
  DuplicateFrame,
  DuplicateSlot,
  ReservedSlot,
  InvalidIdentifier,
  InheritanceCycle,
  UnknownParent,
  DefaultTypeMismatch,
  UnknownSlotInConstraint,
  DynamicInheritanceCycle,
  UnknownFrame,
  UnknownSlot,
  // fmdl / interchange
  Syntax,
  SchemaError,
  VersionUnsupported,
  UntypedRemoteSlot,
  WorldVersionMismatch,
  // inference
  EvalError,
  NoPendingQuestion,
  AnswerTypeMismatch,
  ConstraintViolation,
  CascadeLimitExceeded,
  UnknownResolver,
  ExternArityMismatch,
  UnknownExtern,
  ReadOnlySlot,
  // datasources
  MissingKeyColumn,
  DuplicateKey,
  IoError,
  NoMatchingRow,
  AmbiguousFrameName,
  UnknownColumn,
  UnknownTable,
  // distribution
  BindError,
  ConnectError,
  VersionMismatch,
  UnknownRemoteFrame,
  RemoteError,
  Timeout,
  ProtocolViolation,
  // service / cli
  BadGoal,
};

std::string_view to_string(Errc code);
std::optional<Errc> errc_from_string(std::string_view name);

/// Every failure raised by the toolkit. `details` carries structured extras
/// (offending list index, cycle path, constraint violations, ...).
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& message, std::vector<std::string> details = {})
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  Errc code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

private:
  Errc code_;
  std::vector<std::string> details_;
};

}  // namespace fkb
