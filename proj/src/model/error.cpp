// SPDX-License-Identifier: Apache-2.0
#include "fkb/error.hpp"

namespace fkb {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::TypeMismatch: return "type_mismatch";
    case Errc::DuplicateFrame: return "duplicate_frame";
    case Errc::DuplicateSlot: return "duplicate_slot";
    case Errc::ReservedSlot: return "reserved_slot";
    case Errc::InvalidIdentifier: return "invalid_identifier";
    case Errc::InheritanceCycle: return "inheritance_cycle";
    case Errc::UnknownParent: return "unknown_parent";
    case Errc::DefaultTypeMismatch: return "default_type_mismatch";
    case Errc::UnknownSlotInConstraint: return "unknown_slot_in_constraint";
    case Errc::DynamicInheritanceCycle: return "dynamic_inheritance_cycle";
    case Errc::UnknownFrame: return "unknown_frame";
    case Errc::UnknownSlot: return "unknown_slot";
    case Errc::Syntax: return "syntax";
    case Errc::SchemaError: return "schema_error";
    case Errc::VersionUnsupported: return "version_unsupported";
    case Errc::UntypedRemoteSlot: return "untyped_remote_slot";
    case Errc::WorldVersionMismatch: return "world_version_mismatch";
    case Errc::EvalError: return "eval_error";
    case Errc::NoPendingQuestion: return "no_pending_question";
    case Errc::AnswerTypeMismatch: return "answer_type_mismatch";
    case Errc::ConstraintViolation: return "constraint_violation";
    case Errc::CascadeLimitExceeded: return "cascade_limit_exceeded";
    case Errc::UnknownResolver: return "unknown_resolver";
    case Errc::ExternArityMismatch: return "extern_arity_mismatch";
    case Errc::UnknownExtern: return "unknown_extern";
    case Errc::ReadOnlySlot: return "read_only_slot";
    case Errc::MissingKeyColumn: return "missing_key_column";
    case Errc::DuplicateKey: return "duplicate_key";
    case Errc::IoError: return "io_error";
    case Errc::NoMatchingRow: return "no_matching_row";
    case Errc::AmbiguousFrameName: return "ambiguous_frame_name";
    case Errc::UnknownColumn: return "unknown_column";
    case Errc::UnknownTable: return "unknown_table";
    case Errc::BindError: return "bind_error";
    case Errc::ConnectError: return "connect_error";
    case Errc::VersionMismatch: return "version_mismatch";
    case Errc::UnknownRemoteFrame: return "unknown_remote_frame";
    case Errc::RemoteError: return "remote_error";
    case Errc::Timeout: return "timeout";
    case Errc::ProtocolViolation: return "protocol_violation";
    case Errc::BadGoal: return "bad_goal";
  }
  return "error";
}

}  // namespace fkb

namespace fkb {

std::optional<Errc> errc_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Errc::BadGoal); ++i) {
    if (to_string(static_cast<Errc>(i)) == name) return static_cast<Errc>(i);
  }
  return std::nullopt;
}

}  // namespace fkb
