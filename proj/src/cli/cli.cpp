// SPDX-License-Identifier: Apache-2.0
#include "fkb/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "fkb/distribution.hpp"
#include "fkb/error.hpp"
#include "fkb/fmdl.hpp"
#include "fkb/interchange.hpp"
#include "fkb/service.hpp"
#include "fkb/session.hpp"

namespace fkb::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::atomic<bool> g_stop{false};

struct Usage {
  std::string message;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read '" + path + "'", {path});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(Errc::IoError, "cannot write '" + path + "'", {path});
}

bool looks_like_xml(std::string_view text) {
  auto i = text.find_first_not_of(" \t\r\n");
  return i != std::string_view::npos && text[i] == '<';
}

void report(std::ostream& err, const Error& e) {
  err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
  if (e.code() == Errc::Syntax) {
    for (std::size_t i = 1; i < e.details().size(); ++i) err << e.details()[i] << "\n";
  }
}

/// A knowledge base given as source or as a compiled interchange document.
std::shared_ptr<const FrameWorld> load_kb(const std::string& path) {
  auto text = read_file(path);
  const auto base = fs::absolute(path).parent_path();
  if (looks_like_xml(text)) return interchange::load_world_xml(text, base);
  return fmdl::load_source(text, path, base);
}

std::pair<std::string, std::uint16_t> host_port(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) throw Usage{"expected HOST:PORT, got '" + text + "'"};
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) port = -1;
  } catch (const std::exception&) {
  }
  if (port < 0 || port > 65535) throw Usage{"bad port in '" + text + "'"};
  return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

// ---- scripted answers ------------------------------------------------------------

struct ScriptedAnswer {
  std::string slot;
  std::string value;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// `--answers` names a file of `slot=value` lines, or holds the pairs
/// inline separated by ',', ';' or newlines. "empty" and "" mean none.
std::deque<ScriptedAnswer> load_answers(const std::string& arg) {
  std::string text;
  bool is_file = fs::is_regular_file(arg);
  if (is_file) {
    text = read_file(arg);
  } else if (arg.empty() || arg == "empty") {
    return {};
  } else if (arg.find('=') != std::string::npos) {
    text = arg;
  } else {
    throw Usage{"--answers: no such file '" + arg + "'"};
  }
  std::deque<ScriptedAnswer> out;
  std::string item;
  auto flush = [&] {
    auto line = trim(item);
    item.clear();
    if (line.empty() || line[0] == '#') return;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::SchemaError, "answer '" + line + "' is not slot=value", {line});
    out.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  };
  for (char c : text) {
    // inside a file only newlines separate; a value may hold commas
    if (c == '\n' || (!is_file && (c == ',' || c == ';'))) {
      flush();
    } else {
      item += c;
    }
  }
  flush();
  return out;
}

// ---- consultation output -----------------------------------------------------------

void json_line(std::ostream& out, const char* type, const json& payload) {
  out << R"({"type":)" << json(type).dump() << R"(,"payload":)" << payload.dump() << "}\n";
}

class Printer {
public:
  Printer(std::ostream& out, bool as_json) : out_(out), json_(as_json) {}

  void events(const Session& s) {
    const auto& trace = s.trace();
    for (; next_ < trace.size(); ++next_) event(trace[next_]);
    out_.flush();
  }

  void result(const std::string& frame, const std::string& slot, const Value& v) {
    if (json_) {
      line("result", {{"frame", frame}, {"slot", slot}, {"kind", std::string(to_string(v.kind()))},
                      {"value", service::value_to_json(v)}});
    } else {
      out_ << slot << " = " << (v.is_unknown() ? std::string("unknown") : v.to_literal()) << "\n";
    }
    out_.flush();
  }

  void pending(const Question& q) {
    if (json_) {
      line("pending", service::question_to_json(q));
    } else {
      out_ << "unanswered: " << q.frame << "." << q.slot << " \"" << q.prompt << "\"\n";
    }
    out_.flush();
  }

private:
  void event(const TraceEvent& e) {
    switch (e.kind) {
      case TraceKind::QuestionEmitted:
        if (json_) {
          line("question", {{"id", e.note}, {"frame", e.frame}, {"slot", e.slot}, {"prompt", e.value.as_string()}});
        } else {
          out_ << "? " << e.value.as_string() << " (" << e.frame << "." << e.slot << ")\n";
        }
        break;
      case TraceKind::AnswerReceived:
        if (json_) {
          line("answer", {{"id", e.note}, {"frame", e.frame}, {"slot", e.slot}, {"value", service::value_to_json(e.value)}});
        } else {
          out_ << "> " << e.slot << " = " << e.value.to_literal() << "\n";
        }
        break;
      case TraceKind::Warning:
        if (json_) {
          json p = {{"frame", e.frame}, {"slot", e.slot}, {"message", e.note}};
          if (!e.source.empty()) p["source"] = e.source;
          line("warning", p);
        } else {
          out_ << "warning: " << e.frame << (e.slot.empty() ? "" : "." + e.slot) << ": " << e.note << "\n";
        }
        break;
      default:
        break;
    }
  }

  void line(const char* type, const json& payload) { json_line(out_, type, payload); }

  std::ostream& out_;
  bool json_;
  std::size_t next_ = 0;
};

struct ConsultOptions {
  std::string goal;
  std::optional<std::string> answers;
  bool json = false;
  std::string snapshot_out;
  std::string resume;
};

/// Drives a session to a result, answering from the script or the terminal.
int consult(Session& session, const ConsultOptions& o, std::istream& in, std::ostream& out, std::ostream& err) {
  Printer printer(out, o.json);
  std::deque<ScriptedAnswer> script;
  if (o.answers) script = load_answers(*o.answers);

  std::string frame;
  std::string slot;
  StepResult step;
  if (!o.resume.empty()) {
    if (!session.goal()) throw Error(Errc::SchemaError, "snapshot has no goal", {o.resume});
    std::tie(frame, slot) = *session.goal();
    if (!o.goal.empty() && o.goal != frame + "." + slot) {
      throw Usage{"--goal " + o.goal + " does not match the snapshot goal " + frame + "." + slot};
    }
    if (session.pending()) {
      step = {Outcome::Suspended, {}, session.pending()};
    } else if (const auto* v = session.memory().find(frame, slot)) {
      step = {Outcome::Resolved, *v, std::nullopt};
    } else {
      step = session.infer(frame, slot);
    }
  } else {
    auto dot = o.goal.find('.');
    if (dot == std::string::npos) throw Usage{"--goal must be Frame.slot"};
    frame = o.goal.substr(0, dot);
    slot = o.goal.substr(dot + 1);
    if (!is_identifier(frame) || !is_identifier(slot)) throw Usage{"--goal must be Frame.slot"};
    step = session.infer(frame, slot);
  }

  auto save = [&] {
    if (!o.snapshot_out.empty()) write_file(o.snapshot_out, session.snapshot());
  };

  printer.events(session);
  while (step.outcome == Outcome::Suspended) {
    const Question q = *session.pending();
    std::string text;
    if (o.answers) {
      if (script.empty()) {
        printer.pending(q);
        save();
        return 1;
      }
      auto next = script.front();
      script.pop_front();
      if (next.slot != q.slot) {
        printer.pending(q);
        err << "error: answer script has " << next.slot << " where " << q.slot << " was asked\n";
        save();
        return 1;
      }
      text = next.value;
    } else {
      err << q.prompt << (q.violations.empty() ? "" : " (previous answer violated a constraint)") << ": ";
      err.flush();
      if (!std::getline(in, text)) {
        printer.pending(q);
        save();
        return 1;
      }
      text = trim(text);
    }
    const Value v = parse_answer(text, q.type);
    if (v.is_unknown()) {
      err << "cannot read '" << text << "' as " << q.type.name() << "\n";
      continue;
    }
    try {
      step = session.answer(q.id, v);
    } catch (const Error& e) {
      if (e.code() != Errc::ConstraintViolation && e.code() != Errc::AnswerTypeMismatch) throw;
    }
    printer.events(session);
  }
  printer.result(frame, slot, step.value);
  save();
  return 0;
}

// ---- subcommands ----------------------------------------------------------------------

int do_check(const std::string& path, std::ostream& err) {
  auto text = read_file(path);
  std::vector<fmdl::Diagnostic> diagnostics;
  if (looks_like_xml(text)) {
    diagnostics = fmdl::validate(interchange::world_from_xml(text));
  } else {
    auto parsed = fmdl::parse(text, path);
    diagnostics = parsed.diagnostics;
    if (parsed.world) {
      auto more = fmdl::validate(*parsed.world, &parsed.sources);
      diagnostics.insert(diagnostics.end(), more.begin(), more.end());
    }
  }
  for (const auto& d : diagnostics) err << d.to_string() << "\n";
  return fmdl::has_errors(diagnostics) ? 1 : 0;
}

int do_compile(const std::string& in_path, const std::string& out_path, std::ostream& out, std::ostream& err) {
  auto text = read_file(in_path);
  auto parsed = fmdl::parse(text, in_path);
  auto diagnostics = parsed.diagnostics;
  if (parsed.world) {
    auto more = fmdl::validate(*parsed.world, &parsed.sources);
    diagnostics.insert(diagnostics.end(), more.begin(), more.end());
  }
  for (const auto& d : diagnostics) err << d.to_string() << "\n";
  if (fmdl::has_errors(diagnostics)) return 1;
  auto doc = interchange::world_to_xml(*parsed.world);
  if (out_path.empty() || out_path == "-") {
    out << doc;
  } else {
    write_file(out_path, doc);
  }
  return 0;
}

std::unique_ptr<Session> open_session(const std::shared_ptr<SessionFactory>& factory, const std::string& resume) {
  if (resume.empty()) return factory->create();
  return Session::restore(*factory, read_file(resume));
}

int do_consult(const std::string& kb, const ConsultOptions& o, std::istream& in, std::ostream& out,
               std::ostream& err) {
  if (o.goal.empty() && o.resume.empty()) throw Usage{"consult needs --goal or --resume"};
  auto client = std::make_shared<net::RemoteClient>();
  auto factory = std::make_shared<SessionFactory>(load_kb(kb));
  factory->set_remote(client->connector());
  auto session = open_session(factory, o.resume);
  return consult(*session, o, in, out, err);
}

int do_query(const std::string& url, const std::string& slot, ConsultOptions o, std::istream& in, std::ostream& out,
             std::ostream& err) {
  const auto parsed = net::RemoteUrl::parse(url);
  if (!is_identifier(slot)) throw Usage{"bad slot name '" + slot + "'"};
  net::connect(url);  // fail loudly instead of the engine's unknown-with-warning
  // a one-stub world: the frame is its own origin at the remote side
  auto world = fmdl::load_source("remote frame " + parsed.frame + " at \"" + url + "\";\n", "<query>");
  auto client = std::make_shared<net::RemoteClient>();
  auto factory = std::make_shared<SessionFactory>(world);
  factory->set_remote(client->connector());
  auto session = factory->create();
  o.goal = parsed.frame + "." + slot;
  o.resume.clear();
  return consult(*session, o, in, out, err);
}

int do_serve(const std::string& kb, const std::string& listen, const std::string& http, std::ostream& out) {
  auto [host, port] = host_port(listen);
  auto world = load_kb(kb);
  g_stop = false;
  net::Instance instance(net::ServerOptions{host, port});
  instance.start(world);
  out << "serving " << world->frames().size() << " frames at kb://" << host << ":" << instance.port() << "\n";

  std::unique_ptr<service::ConsultService> svc;
  std::unique_ptr<service::HttpServer> web;
  if (!http.empty()) {
    auto [hhost, hport] = host_port(http);
    auto factory = std::make_shared<SessionFactory>(world);
    factory->set_remote(instance.client().connector());
    svc = std::make_unique<service::ConsultService>(factory);
    web = std::make_unique<service::HttpServer>(*svc);
    auto bound = web->listen(hhost, hport);
    out << "consultation api at http://" << hhost << ":" << bound << "/api\n";
  }
  out.flush();
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  if (web) web->stop();
  instance.stop();
  return 0;
}

int do_export_trace(const std::string& path, bool as_json, std::ostream& out) {
  auto doc = xml::parse(read_file(path));
  if (doc.name != "snapshot") throw Error(Errc::SchemaError, "not a snapshot document", {"/", doc.name});
  for (const auto& child : doc.children) {
    if (child.name != "trace") continue;
    if (!as_json) {
      out << xml::write(child);
      return 0;
    }
    for (const auto& ev : child.children) {
      json p = json::object();
      for (const auto& [k, v] : ev.attributes) p[k] = v;
      if (!ev.children.empty()) {
        p["value"] = service::value_to_json(interchange::value_from_xml(ev.children[0], "/snapshot/trace/" + ev.name));
      }
      json_line(out, "trace", p);
    }
    return 0;
  }
  throw Error(Errc::SchemaError, "snapshot has no trace", {"/snapshot", "trace"});
}

}  // namespace

void request_stop() { g_stop = true; }

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Frame knowledge bases: compile, check, consult and serve", "fkb"};
  app.require_subcommand(1);

  std::string input;
  std::string output;
  auto* compile = app.add_subcommand("compile", "Compile a knowledge source to interchange XML");
  compile->add_option("input", input, "Knowledge source (.fmdl)")->required();
  compile->add_option("-o,--output", output, "Output file (stdout when omitted)");

  auto* check = app.add_subcommand("check", "Report diagnostics for a knowledge source");
  check->add_option("input", input, "Knowledge source or interchange document")->required();

  ConsultOptions copts;
  std::string answers;
  auto* consult_cmd = app.add_subcommand("consult", "Run a consultation");
  consult_cmd->add_option("kb", input, "Knowledge base (.fmdl source or compiled XML)")->required();
  consult_cmd->add_option("--goal", copts.goal, "Goal as Frame.slot");
  auto* answers_opt = consult_cmd->add_option("--answers", answers, "Scripted answers: file of slot=value lines, or inline pairs");
  consult_cmd->add_flag("--json", copts.json, "One JSON object per output line");
  consult_cmd->add_option("--snapshot-out", copts.snapshot_out, "Write the session snapshot here on exit");
  consult_cmd->add_option("--resume", copts.resume, "Continue from a snapshot");

  std::string listen;
  std::string http;
  auto* serve = app.add_subcommand("serve", "Serve a knowledge base to remote instances");
  serve->add_option("kb", input, "Knowledge base")->required();
  serve->add_option("--listen", listen, "HOST:PORT for the knowledge protocol")->required();
  serve->add_option("--http", http, "HOST:PORT for the consultation API");

  std::string url;
  std::string slot;
  ConsultOptions qopts;
  std::string qanswers;
  auto* query = app.add_subcommand("query", "Ask a remote instance for one slot");
  query->add_option("url", url, "kb://host:port/Frame")->required();
  query->add_option("slot", slot, "Slot name")->required();
  auto* qanswers_opt = query->add_option("--answers", qanswers, "Scripted answers");
  query->add_flag("--json", qopts.json, "One JSON object per output line");

  bool trace_json = false;
  auto* export_trace = app.add_subcommand("export-trace", "Print the trace of a session snapshot");
  export_trace->add_option("snapshot", input, "Snapshot document")->required();
  export_trace->add_flag("--json", trace_json, "One JSON object per event");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*compile) return do_compile(input, output, out, err);
    if (*check) return do_check(input, err);
    if (*consult_cmd) {
      if (*answers_opt) copts.answers = answers;
      return do_consult(input, copts, in, out, err);
    }
    if (*serve) return do_serve(input, listen, http, out);
    if (*query) {
      if (*qanswers_opt) qopts.answers = qanswers;
      return do_query(url, slot, qopts, in, out, err);
    }
    if (*export_trace) return do_export_trace(input, trace_json, out);
  } catch (const Usage& u) {
    err << "usage error: " << u.message << "\n";
    return 2;
  } catch (const Error& e) {
    report(err, e);
    return 1;
  }
  return 2;
}

}  // namespace fkb::cli
