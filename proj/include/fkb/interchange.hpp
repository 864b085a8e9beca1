// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fkb/world.hpp"

namespace fkb::xml {

inline constexpr std::size_t kDefaultMaxBytes = 16u << 20;

/// Minimal element tree. An element holds either child elements or text.
struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Element> children;
  std::string text;

  Element() = default;
  explicit Element(std::string n) : name(std::move(n)) {}

  const std::string* attr(std::string_view key) const;
  Element& set(std::string key, std::string value);
  Element& add(Element child);
  Element& add(std::string child_name);
};

/// Parses a UTF-8 document. DOCTYPE declarations and entity definitions are
/// rejected. Throws Errc::SchemaError (path "/", parser message) on
/// malformed input or when the document exceeds `max_bytes`.
Element parse(std::string_view text, std::size_t max_bytes = kDefaultMaxBytes);

/// Deterministic rendering: declaration line, 2-space indentation,
/// attributes in insertion order, empty elements self-closed.
std::string write(const Element& root);

}  // namespace fkb::xml

namespace fkb::interchange {

inline constexpr std::string_view kFormatVersion = "1";

xml::Element value_to_xml(const Value& value);
Value value_from_xml(const xml::Element& element, const std::string& path);

xml::Element expr_to_xml(const Expr& e);
ExprPtr expr_from_xml(const xml::Element& element, const std::string& path);

xml::Element frame_to_xml(const FrameDef& frame);
FrameDef frame_from_xml(const xml::Element& element, const std::string& path);

xml::Element world_to_element(const WorldBuild& build);
WorldBuild world_from_element(const xml::Element& root);

/// `<frameworld version="1">` document for a frozen world or a build.
std::string world_to_xml(const FrameWorld& world);
std::string world_to_xml(const WorldBuild& build);

/// Throws SchemaError(path, reason) or VersionUnsupported(found).
WorldBuild world_from_xml(std::string_view text);
std::shared_ptr<const FrameWorld> load_world_xml(std::string_view text,
                                                 const std::filesystem::path& base_dir = {});

/// `<rules frame="...">` document holding every rule action of `frame` in
/// declaration order.
xml::Element rules_to_xml(const FrameDef& frame);

/// Appends the rules of `rules` (a `<rules>` element) to `target` after its
/// own actions, in document order. Rules for slots not visible from the
/// target (its own slots, plus its ancestry in `world` when given) add the
/// slot, typed from the root of the assigned expression; throws
/// UntypedRemoteSlot when that type cannot be decided.
void merge_rules(FrameDef& target, const xml::Element& rules, const FrameSource* world = nullptr);

/// World-level form: returns a copy of `world` with the rules merged into
/// `target_frame`. Throws UnknownFrame when the target is absent.
WorldBuild merge_rules(const FrameWorld& world, const xml::Element& rules, const std::string& target_frame);

/// Kind decided from the root of an assigned expression, if unambiguous.
std::optional<SlotType> infer_slot_type(const Expr& e);

}  // namespace fkb::interchange
