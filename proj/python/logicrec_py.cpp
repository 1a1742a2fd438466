#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "logicrec/config.hpp"
#include "logicrec/dataset.hpp"
#include "logicrec/kg_store.hpp"
#include "logicrec/model.hpp"
#include "logicrec/oracle.hpp"
#include "logicrec/synthetic.hpp"
#include "logicrec/training.hpp"

namespace py = pybind11;
using namespace logicrec;

namespace {

struct PyQuery {
  QueryPtr node;
};

std::vector<std::string> names(const KnowledgeGraph& kg, const IdSet& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(kg.entities().name(id));
  return out;
}

std::vector<std::string> names(const KnowledgeGraph& kg, const std::vector<EntityId>& ids, std::size_t limit) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) out.push_back(kg.entities().name(ids[i]));
  return out;
}

}  // namespace

PYBIND11_MODULE(_logicrec, m) {
  m.doc() = "LogicRec knowledge-graph recommendation engine";

  py::register_exception<Error>(m, "LogicRecError");

  py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
      .def_property_readonly("num_entities", &KnowledgeGraph::num_entities)
      .def_property_readonly("num_relations", &KnowledgeGraph::num_relations)
      .def_property_readonly("num_triples", [](const KnowledgeGraph& kg) { return kg.triples().size(); })
      .def_property_readonly("items", [](const KnowledgeGraph& kg) { return names(kg, kg.items()); })
      .def_property_readonly("users", [](const KnowledgeGraph& kg) { return names(kg, kg.users()); })
      .def_property_readonly("like_relation",
                             [](const KnowledgeGraph& kg) { return kg.relations().name(kg.like_rel()); })
      .def("entity_id", &KnowledgeGraph::entity_id)
      .def("entity_name", [](const KnowledgeGraph& kg, EntityId id) { return kg.entities().name(id); })
      .def("neighbors_out",
           [](const KnowledgeGraph& kg, const std::string& entity, const std::string& relation) {
             return names(kg, kg.neighbors_out(kg.entity_id(entity), kg.relation_id(relation)));
           })
      .def("neighbors_in",
           [](const KnowledgeGraph& kg, const std::string& relation, const std::string& entity) {
             return names(kg, kg.neighbors_in(kg.relation_id(relation), kg.entity_id(entity)));
           })
      .def("save", [](const KnowledgeGraph& kg, const std::filesystem::path& dir) { write_graph(kg, dir); });

  m.def("load_graph", &load_graph, py::arg("triples"), py::arg("items"), py::arg("users"), py::arg("like"));

  m.def(
      "synthetic_graph",
      [](std::size_t items, std::size_t users, std::size_t clusters, double noise, std::uint64_t seed) {
        SyntheticConfig cfg;
        cfg.items = items;
        cfg.users = users;
        cfg.clusters = clusters;
        cfg.noise = noise;
        cfg.seed = seed;
        return make_synthetic_graph(cfg);
      },
      py::arg("items") = 100, py::arg("users") = 50, py::arg("clusters") = 4, py::arg("noise") = 0.1,
      py::arg("seed") = 0);

  py::class_<KgSplit>(m, "KgSplit")
      .def_readonly("full", &KgSplit::full)
      .def_readonly("train", &KgSplit::train)
      .def_readonly("fraction", &KgSplit::fraction)
      .def_readonly("seed", &KgSplit::seed)
      .def_property_readonly("num_held_out", [](const KgSplit& s) { return s.held_out.size(); })
      .def("save", [](const KgSplit& s, const std::filesystem::path& dir) { return save_split(s, dir); });

  m.def("split_edges", &split_edges, py::arg("kg"), py::arg("fraction"), py::arg("seed"));
  m.def("load_split", &load_split, py::arg("dir"));

  py::class_<PyQuery>(m, "Query")
      .def_property_readonly("shape", [](const PyQuery& q) { return std::string(shape_name(classify_shape(*q.node))); })
      .def_property_readonly("key", [](const PyQuery& q) { return q.node->key(); })
      .def("serialize", [](const PyQuery& q, const KnowledgeGraph& kg) { return serialize_query(*q.node, kg); })
      .def("__eq__", [](const PyQuery& a, const PyQuery& b) { return *a.node == *b.node; });

  m.def(
      "parse_query", [](const std::string& text, const KnowledgeGraph& kg) { return PyQuery{parse_query(text, kg)}; },
      py::arg("text"), py::arg("kg"));

  m.def("answer_requirement", [](const KnowledgeGraph& kg, const PyQuery& q) {
    return names(kg, answer_requirement(kg, *q.node));
  });
  m.def("answer_preference", [](const KnowledgeGraph& kg, const std::string& user) {
    return names(kg, answer_preference(kg, kg.entity_id(user)));
  });
  m.def("answer_logicrec", [](const KnowledgeGraph& kg, const std::string& user, const PyQuery& q) {
    return names(kg, answer_logicrec(kg, kg.entity_id(user), *q.node));
  });

  m.def(
      "build_dataset",
      [](const KgSplit& split, const std::map<std::string, std::string>& settings) {
        KeyValueConfig kv;
        for (const auto& [k, v] : settings) kv.set(k, v);
        const auto set = build_dataset(split, dataset_config_from(kv));
        py::dict out;
        for (auto kind : {SplitKind::Train, SplitKind::Valid, SplitKind::Test}) {
          std::vector<std::string> lines;
          for (const auto& r : set.records(kind)) lines.push_back(record_to_json(split.full, r));
          out[py::str(std::string(split_name(kind)))] = lines;
        }
        out["shortfalls"] = set.shortfalls;
        out["stats"] = dataset_stats(set);
        return out;
      },
      py::arg("split"), py::arg("settings"));

  m.def("hit_at_k", &hit_at_k, py::arg("rank"), py::arg("k"));
  m.def("ndcg_at_k", &ndcg_at_k, py::arg("rank"), py::arg("k"));

  py::class_<LogicRecModel>(m, "Model")
      .def(py::init([](const KnowledgeGraph& kg, std::size_t dim, std::size_t experts, double gamma,
                       const std::string& variant, std::uint64_t seed) {
             ModelConfig cfg{dim, experts, gamma, parse_variant(variant), seed};
             return LogicRecModel(kg, cfg);
           }),
           py::arg("kg"), py::arg("dim") = 32, py::arg("experts") = 4, py::arg("gamma") = 12.0,
           py::arg("variant") = "mtl", py::arg("seed") = 0)
      .def_static("load", &LogicRecModel::load, py::arg("path"), py::arg("kg"))
      .def("save", &LogicRecModel::save)
      .def_property_readonly("dim", &LogicRecModel::dim)
      .def_property_readonly("variant", [](const LogicRecModel& m) { return std::string(variant_name(m.config().variant)); })
      .def(
          "embedding",
          [](LogicRecModel& model, const KnowledgeGraph& kg, const std::string& user, const PyQuery& q) {
            return model.task_embedding(kg.entity_id(user), *q.node, Task::LogicRec).data;
          },
          py::arg("kg"), py::arg("user"), py::arg("query"))
      .def(
          "recommend",
          [](LogicRecModel& model, const KnowledgeGraph& kg, const std::string& user, const PyQuery& q,
             std::size_t top) {
            const Tensor emb = model.task_embedding(kg.entity_id(user), *q.node, Task::LogicRec);
            return names(kg, rank_items(model, emb, kg.items()), top);
          },
          py::arg("kg"), py::arg("user"), py::arg("query"), py::arg("top") = 10);
}
