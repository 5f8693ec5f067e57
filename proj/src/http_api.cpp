#include "fsteer/http_api.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include "fsteer/direction_io.hpp"
#include "fsteer/error.hpp"

namespace fsteer {

namespace {

using Handler = std::function<nlohmann::json(const httplib::Request&)>;

nlohmann::json body_of(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
        return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error&) {
        throw ArgumentError("request body is not valid JSON");
    }
}

std::int64_t seed_param(const httplib::Request& req) {
    const auto& raw = req.path_params.at("seed");
    try {
        std::size_t used = 0;
        const auto v = std::stoll(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::logic_error&) {
        throw ArgumentError(fmt::format("seed '{}' is not an integer", raw));
    }
}

void send_json(httplib::Response& res, int status, const nlohmann::json& j) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

httplib::Server::Handler wrap(Handler h, int ok_status = 200) {
    return [h = std::move(h), ok_status](const httplib::Request& req, httplib::Response& res) {
        try {
            send_json(res, ok_status, h(req));
        } catch (const std::exception& e) {
            send_json(res, status_for(e), {{"error", e.what()}});
        }
    };
}

nlohmann::json rendered_json(const std::vector<RenderedTestImage>& images) {
    auto out = nlohmann::json::array();
    for (const auto& r : images) {
        auto j = image_to_json(r.image);
        j["strength"] = r.strength;
        j["masked"] = r.masked;
        out.push_back(std::move(j));
    }
    return {{"images", out}};
}

nlohmann::json exemplar_json(const Exemplar& e) {
    return {{"id", e.id}, {"seed", e.seed}, {"polarity", std::string(to_string(e.polarity))}, {"weight", e.weight}};
}

nlohmann::json stored_json(const StoredDirection& s) {
    return {{"name", s.name}, {"model_hash", s.model_hash}};
}

Stroke stroke_from_body(const nlohmann::json& j) {
    Stroke s;
    try {
        s.radius = j.at("radius").get<double>();
        for (const auto& p : j.at("polyline")) s.polyline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(fmt::format("stroke needs polyline [[x, y], ...] and radius: {}", e.what()));
    }
    return s;
}

template <typename T>
T field(const nlohmann::json& j, const char* name) {
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ArgumentError(fmt::format("missing or malformed field '{}'", name));
    }
}

} // namespace

int status_for(const std::exception& e) {
    if (dynamic_cast<const NotFoundError*>(&e)) return 404;
    if (dynamic_cast<const ConflictError*>(&e)) return 409;
    if (dynamic_cast<const StructuralError*>(&e)) return 422;
    if (dynamic_cast<const StateError*>(&e)) return 400;
    if (dynamic_cast<const ArgumentError*>(&e)) return 400;
    if (dynamic_cast<const NumericError*>(&e)) return 422;
    if (dynamic_cast<const InvalidReferenceError*>(&e)) return 422;
    if (dynamic_cast<const LoadError*>(&e)) return 503;
    return 500;
}

void register_routes(httplib::Server& server, SessionService& svc) {
    server.Get("/v1/health", wrap([&svc](const httplib::Request&) {
                   return nlohmann::json{{"status", "ok"},
                                         {"model_hash", svc.adapter().model_hash()},
                                         {"latent_dim", svc.adapter().latent_dim()},
                                         {"resolution", {svc.adapter().resolution().height,
                                                         svc.adapter().resolution().width}}};
               }));

    server.Post("/v1/sessions", wrap(
                                    [&svc](const httplib::Request&) {
                                        return session_to_json(svc.session(svc.create_session()));
                                    },
                                    201));

    server.Get("/v1/sessions/:id", wrap([&svc](const httplib::Request& req) {
                   return session_to_json(svc.session(req.path_params.at("id")));
               }));

    server.Get("/v1/sessions/:id/direction", wrap([&svc](const httplib::Request& req) {
                   const auto s = svc.session(req.path_params.at("id"));
                   const auto d = svc.current_direction(s);
                   if (!d) return nlohmann::json{{"direction", nullptr}};
                   return nlohmann::json{{"direction", direction_to_json(*d, s.model_hash)}};
               }));

    server.Post("/v1/sessions/:id/gallery", wrap([&svc](const httplib::Request& req) {
                    const auto b = body_of(req);
                    const auto page = svc.gallery(req.path_params.at("id"), b.value("count", 24),
                                                  b.value("page_seed", std::uint64_t{0}));
                    auto out = nlohmann::json::array();
                    for (const auto& g : page) {
                        out.push_back({{"exemplar_id", g.exemplar_id},
                                       {"seed", g.seed},
                                       {"thumbnail", image_to_json(g.thumbnail)}});
                    }
                    return nlohmann::json{{"entries", out}};
                }));

    server.Post("/v1/sessions/:id/exemplars", wrap(
                                                  [&svc](const httplib::Request& req) {
                                                      const auto b = body_of(req);
                                                      std::optional<double> w;
                                                      if (b.contains("weight")) w = field<double>(b, "weight");
                                                      const auto e = svc.select(
                                                          req.path_params.at("id"), field<std::int64_t>(b, "seed"),
                                                          polarity_from_string(field<std::string>(b, "polarity")), w);
                                                      return exemplar_json(e);
                                                  },
                                                  201));

    server.Delete("/v1/sessions/:id/exemplars/:eid", wrap([&svc](const httplib::Request& req) {
                      svc.deselect(req.path_params.at("id"), req.path_params.at("eid"));
                      return nlohmann::json{{"removed", req.path_params.at("eid")}};
                  }));

    server.Post("/v1/sessions/:id/exemplars/:eid/weight", wrap([&svc](const httplib::Request& req) {
                    const auto b = body_of(req);
                    const auto adj = svc.adjust_weight(req.path_params.at("id"), req.path_params.at("eid"),
                                                       field<int>(b, "delta_steps"));
                    auto j = exemplar_json(adj.exemplar);
                    j["clamped"] = adj.clamped;
                    return j;
                }));

    server.Post("/v1/sessions/:id/test", wrap([&svc](const httplib::Request& req) {
                    return rendered_json(svc.test_direction(req.path_params.at("id")));
                }));

    server.Post("/v1/sessions/:id/masks", wrap(
                                              [&svc](const httplib::Request& req) {
                                                  const auto b = body_of(req);
                                                  return mask_to_wire(svc.create_mask(
                                                      req.path_params.at("id"), field<std::int64_t>(b, "test_seed"),
                                                      stroke_from_body(b.contains("stroke") ? b.at("stroke") : b)));
                                              },
                                              201));

    server.Post("/v1/sessions/:id/masks/:mid/cycle", wrap([&svc](const httplib::Request& req) {
                    return mask_to_wire(svc.cycle_mask(req.path_params.at("id"), req.path_params.at("mid")));
                }));

    server.Post("/v1/sessions/:id/apply", wrap([&svc](const httplib::Request& req) {
                    return rendered_json(svc.apply_masks(req.path_params.at("id")));
                }));

    server.Post("/v1/sessions/:id/test-images", wrap(
                                                    [&svc](const httplib::Request& req) {
                                                        const auto b = body_of(req);
                                                        std::optional<double> strength;
                                                        if (b.contains("strength")) strength = field<double>(b, "strength");
                                                        svc.add_test_image(req.path_params.at("id"),
                                                                           field<std::int64_t>(b, "seed"), strength);
                                                        return session_to_json(svc.session(req.path_params.at("id")));
                                                    },
                                                    201));

    server.Delete("/v1/sessions/:id/test-images/:seed", wrap([&svc](const httplib::Request& req) {
                      svc.remove_test_image(req.path_params.at("id"), seed_param(req));
                      return session_to_json(svc.session(req.path_params.at("id")));
                  }));

    server.Put("/v1/sessions/:id/test-images/:seed/strength", wrap([&svc](const httplib::Request& req) {
                   const auto b = body_of(req);
                   svc.set_strength(req.path_params.at("id"), seed_param(req), field<double>(b, "strength"));
                   return session_to_json(svc.session(req.path_params.at("id")));
               }));

    server.Post("/v1/sessions/:id/save", wrap(
                                             [&svc](const httplib::Request& req) {
                                                 const auto b = body_of(req);
                                                 return stored_json(svc.save_direction(
                                                     req.path_params.at("id"), field<std::string>(b, "name")));
                                             },
                                             201));

    server.Get("/v1/sessions/:id/log", wrap([&svc](const httplib::Request& req) {
                   return svc.export_log(req.path_params.at("id"));
               }));

    server.Get("/v1/directions", wrap([&svc](const httplib::Request&) {
                   auto out = nlohmann::json::array();
                   for (const auto& s : svc.list_directions()) out.push_back(stored_json(s));
                   return nlohmann::json{{"directions", out}};
               }));

    server.Get("/v1/directions/:name", wrap([&svc](const httplib::Request& req) {
                   const auto d = svc.load_direction(req.path_params.at("name"));
                   return direction_to_json(d, svc.adapter().model_hash());
               }));
}

} // namespace fsteer
