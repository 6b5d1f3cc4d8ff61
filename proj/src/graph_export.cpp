#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "surf/forest.hpp"

namespace surf {

namespace {

const char* role_name(VertexRole r) { return r == VertexRole::Leaf ? "leaf" : "internal"; }

}  // namespace

std::string to_dot(const Subgraph& g) {
    std::ostringstream out;
    out << "digraph T {\n";
    out << "  // root " << g.root << "; internal = index >= 1, leaf = index <= 0\n";
    for (const auto& v : g.vertices) out << "  " << v.id << " [role=" << role_name(v.role) << "];\n";
    for (const auto& e : g.edges) out << "  " << e.from << " -> " << e.to << " [choice=" << e.choice << "];\n";
    out << "}\n";
    return out.str();
}

std::string to_json(const Subgraph& g) {
    nlohmann::ordered_json doc;
    doc["schema"] = "surf.subgraph";
    doc["version"] = kSubgraphSchemaVersion;
    doc["root"] = g.root;
    auto& vertices = doc["vertices"] = nlohmann::ordered_json::array();
    for (const auto& v : g.vertices) vertices.push_back({{"id", v.id}, {"role", role_name(v.role)}});
    auto& edges = doc["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : g.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"choice", e.choice}});
    return doc.dump(2) + "\n";
}

Subgraph subgraph_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("subgraph JSON: ") + e.what());
    }
    if (doc.value("schema", "") != "surf.subgraph") throw std::invalid_argument("subgraph JSON: missing or wrong 'schema'");
    if (doc.value("version", -1) != kSubgraphSchemaVersion) throw std::invalid_argument("subgraph JSON: unsupported 'version'");
    Subgraph g;
    try {
        g.root = doc.at("root").get<Vertex>();
        for (const auto& v : doc.at("vertices")) {
            const auto role = v.at("role").get<std::string>();
            if (role != "leaf" && role != "internal") throw std::invalid_argument("subgraph JSON: bad vertex 'role'");
            g.vertices.push_back({v.at("id").get<Vertex>(), role == "leaf" ? VertexRole::Leaf : VertexRole::Internal});
        }
        for (const auto& e : doc.at("edges"))
            g.edges.push_back({e.at("from").get<Vertex>(), e.at("to").get<Vertex>(), e.at("choice").get<int>()});
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("subgraph JSON: ") + e.what());
    }
    return g;
}

}  // namespace surf
