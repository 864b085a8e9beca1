// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fkb/frame.hpp"

namespace fkb {

/// Per-session store of known slot values keyed by (frame, slot).
class WorkingMemory {
public:
  using Key = std::pair<std::string, std::string>;

  const Value* find(std::string_view frame, std::string_view slot) const;
  void set(const std::string& frame, const std::string& slot, Value value);
  bool erase(const std::string& frame, const std::string& slot);
  const std::map<Key, Value>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  friend bool operator==(const WorkingMemory&, const WorkingMemory&) = default;

private:
  std::map<Key, Value> entries_;
};

/// Mutable, single-threaded build phase of a frame world.
class WorldBuild {
public:
  /// Throws DuplicateFrame / DuplicateSlot / ReservedSlot / InvalidIdentifier.
  void add_frame(FrameDef frame);
  /// Declares an external function usable from rule expressions.
  void add_extern(const std::string& name, int arity);

  FrameDef* find(std::string_view name);
  const FrameDef* find(std::string_view name) const;
  const std::vector<FrameDef>& frames() const { return frames_; }
  std::vector<FrameDef>& frames() { return frames_; }
  const std::map<std::string, int>& externs() const { return externs_; }

  /// Directory against which relative table locations resolve.
  std::filesystem::path base_dir;

private:
  std::vector<FrameDef> frames_;
  std::map<std::string, int> externs_;
};

/// Name lookup over a frame hierarchy. Implemented by frozen worlds and by
/// sessions, which add per-session frames (table members, generated frames,
/// merged remote rules) on top of their world.
class FrameSource {
public:
  virtual ~FrameSource() = default;
  virtual const FrameDef* find(std::string_view name) const = 0;
  /// Direct children in declaration order.
  virtual std::vector<std::string> children(std::string_view name) const = 0;
  const FrameDef& at(std::string_view name) const;  // throws UnknownFrame
};

/// Immutable, validated frame world; safe to share across threads.
class FrameWorld : public FrameSource {
public:
  /// Validates the forest property, parent resolution, default typing and
  /// constraint slot references. Throws InheritanceCycle, UnknownParent,
  /// DefaultTypeMismatch or UnknownSlotInConstraint.
  static std::shared_ptr<const FrameWorld> freeze(WorldBuild build);

  const FrameDef* find(std::string_view name) const override;
  const std::vector<FrameDef>& frames() const { return build_.frames(); }
  const std::map<std::string, int>& externs() const { return build_.externs(); }
  const std::filesystem::path& base_dir() const { return build_.base_dir; }

  /// Static children in declaration order (framesets are listed under their
  /// declared parent; their members are enumerated by sessions).
  std::vector<std::string> children(std::string_view name) const override;

  /// Content fingerprint; snapshots are only restorable against an equal tag.
  const std::string& version() const { return version_; }

  /// Back to a build (copy) for rule merging or frame generation.
  WorldBuild thaw() const { return build_; }

  friend bool operator==(const FrameWorld& a, const FrameWorld& b);

private:
  FrameWorld() = default;

  WorldBuild build_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::map<std::string, std::vector<std::string>, std::less<>> children_;
  std::string version_;
};

/// Structural equality of builds (declaration order, slots, constraints, actions).
bool equal(const WorldBuild& a, const WorldBuild& b);

/// Frame followed by its ancestors up to the root. A reference stored in
/// working memory under (frame, "parent") overrides the static parent from
/// that frame upward. Throws DynamicInheritanceCycle.
std::vector<std::string> ancestry(const FrameSource& world, std::string_view frame,
                                  const WorkingMemory* memory = nullptr);

struct SlotLookup {
  const SlotDef* def = nullptr;
  std::string defining_frame;
};

/// Nearest declaration along the ancestry; child declarations shadow. The
/// reserved `parent` slot resolves to an implicit reference slot on `frame`.
/// Throws UnknownSlot.
SlotLookup slot_lookup(const FrameSource& world, std::string_view frame, std::string_view slot,
                       const WorkingMemory* memory = nullptr);

/// Constraints along the ancestry of `frame` that mention `slot`, evaluated
/// with `candidate` substituted and every other slot read from working
/// memory. Constraints that are Unknown pass. Returns the violated ones.
std::vector<ExprPtr> check_constraints(const FrameSource& world, std::string_view frame,
                                       std::string_view slot, const Value& candidate,
                                       const WorkingMemory& memory);

/// The implicit definition of the reserved `parent` slot.
const SlotDef& parent_slot_def();

}  // namespace fkb
