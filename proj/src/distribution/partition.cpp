// SPDX-License-Identifier: Apache-2.0
#include "fkb/distribution.hpp"
#include "fkb/error.hpp"

namespace fkb::net {

std::vector<WorldBuild> partition_world(const WorldBuild& world, const std::map<std::string, std::size_t>& assignment,
                                        const std::vector<std::string>& endpoints) {
  std::vector<WorldBuild> nodes(endpoints.size());
  for (auto& n : nodes) {
    n.base_dir = world.base_dir;
    for (const auto& [name, arity] : world.externs()) n.add_extern(name, arity);
  }
  for (const auto& f : world.frames()) {
    auto it = assignment.find(f.name);
    if (it == assignment.end()) throw Error(Errc::UnknownFrame, "frame '" + f.name + "' has no node", {f.name});
    if (it->second >= endpoints.size()) {
      throw Error(Errc::UnknownFrame, "frame '" + f.name + "' assigned to missing node " + std::to_string(it->second),
                  {f.name});
    }
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (k == it->second || f.kind == FrameKind::RemoteStub) {
        nodes[k].add_frame(f);
        continue;
      }
      FrameDef stub;
      stub.name = f.name;
      stub.parent = f.parent;
      stub.kind = FrameKind::RemoteStub;
      stub.url = "kb://" + endpoints[it->second] + "/" + f.name;
      nodes[k].add_frame(std::move(stub));
    }
  }
  return nodes;
}

}  // namespace fkb::net
