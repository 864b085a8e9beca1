// SPDX-License-Identifier: Apache-2.0
#include <expat.h>

#include "fkb/error.hpp"
#include "fkb/interchange.hpp"

namespace fkb::xml {

const std::string* Element::attr(std::string_view key) const {
  for (const auto& [k, v] : attributes) {
    if (k == key) return &v;
  }
  return nullptr;
}

Element& Element::set(std::string key, std::string value) {
  for (auto& [k, v] : attributes) {
    if (k == key) {
      v = std::move(value);
      return *this;
    }
  }
  attributes.emplace_back(std::move(key), std::move(value));
  return *this;
}

Element& Element::add(Element child) {
  children.push_back(std::move(child));
  return children.back();
}

Element& Element::add(std::string child_name) { return add(Element(std::move(child_name))); }

namespace {

struct Builder {
  XML_Parser parser = nullptr;
  std::vector<Element> stack;
  std::optional<Element> root;
  std::string refused;
};

void on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
  auto* b = static_cast<Builder*>(data);
  Element e(name);
  for (int i = 0; attrs[i]; i += 2) e.attributes.emplace_back(attrs[i], attrs[i + 1]);
  b->stack.push_back(std::move(e));
}

void on_end(void* data, const XML_Char*) {
  auto* b = static_cast<Builder*>(data);
  Element e = std::move(b->stack.back());
  b->stack.pop_back();
  if (!e.children.empty()) e.text.clear();
  if (b->stack.empty()) {
    b->root = std::move(e);
  } else {
    b->stack.back().children.push_back(std::move(e));
  }
}

void on_text(void* data, const XML_Char* s, int len) {
  auto* b = static_cast<Builder*>(data);
  if (!b->stack.empty()) b->stack.back().text.append(s, static_cast<std::size_t>(len));
}

void on_doctype(void* data, const XML_Char*, const XML_Char*, const XML_Char*, int) {
  auto* b = static_cast<Builder*>(data);
  b->refused = "document type declarations are not accepted";
  XML_StopParser(b->parser, XML_FALSE);
}

void on_entity(void* data, const XML_Char*, int, const XML_Char*, int, const XML_Char*, const XML_Char*,
               const XML_Char*, const XML_Char*) {
  auto* b = static_cast<Builder*>(data);
  b->refused = "entity declarations are not accepted";
  XML_StopParser(b->parser, XML_FALSE);
}

[[noreturn]] void reject(const std::string& reason) {
  throw Error(Errc::SchemaError, "malformed document: " + reason, {"/", reason});
}

void escape(std::string_view s, bool attribute, std::string& out) {
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"':
        if (attribute) {
          out += "&quot;";
        } else {
          out += c;
        }
        break;
      case '\r': out += "&#13;"; break;
      case '\n':
        if (attribute) {
          out += "&#10;";
        } else {
          out += c;
        }
        break;
      case '\t':
        if (attribute) {
          out += "&#9;";
        } else {
          out += c;
        }
        break;
      default: out += c;
    }
  }
}

void write_element(const Element& e, int depth, std::string& out) {
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  out += '<';
  out += e.name;
  for (const auto& [k, v] : e.attributes) {
    out += ' ';
    out += k;
    out += "=\"";
    escape(v, true, out);
    out += '"';
  }
  if (e.children.empty() && e.text.empty()) {
    out += "/>\n";
    return;
  }
  out += '>';
  if (e.children.empty()) {
    escape(e.text, false, out);
  } else {
    out += '\n';
    for (const auto& c : e.children) write_element(c, depth + 1, out);
    out.append(static_cast<std::size_t>(depth) * 2, ' ');
  }
  out += "</";
  out += e.name;
  out += ">\n";
}

}  // namespace

Element parse(std::string_view text, std::size_t max_bytes) {
  if (text.size() > max_bytes) {
    reject("document exceeds " + std::to_string(max_bytes) + " bytes");
  }
  Builder b;
  b.parser = XML_ParserCreate("UTF-8");
  if (!b.parser) throw std::bad_alloc();
  XML_SetUserData(b.parser, &b);
  XML_SetElementHandler(b.parser, on_start, on_end);
  XML_SetCharacterDataHandler(b.parser, on_text);
  XML_SetStartDoctypeDeclHandler(b.parser, on_doctype);
  XML_SetEntityDeclHandler(b.parser, on_entity);
  const auto status = XML_Parse(b.parser, text.data(), static_cast<int>(text.size()), XML_TRUE);
  std::string reason;
  if (status != XML_STATUS_OK) {
    reason = !b.refused.empty() ? b.refused
                                : std::string(XML_ErrorString(XML_GetErrorCode(b.parser))) + " at line " +
                                      std::to_string(XML_GetCurrentLineNumber(b.parser));
  }
  XML_ParserFree(b.parser);
  if (!reason.empty()) reject(reason);
  if (!b.root) reject("no root element");
  return std::move(*b.root);
}

std::string write(const Element& root) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  write_element(root, 0, out);
  return out;
}

}  // namespace fkb::xml
