#include "midway/service.hpp"

#include "midway/table.hpp"

namespace midway::app {

void install_routes(httplib::Server& server, const Workspace& ws) {
  server.Get("/schema", [&ws](const httplib::Request&, httplib::Response& res) {
    if (!ws.table()) {
      res.status = 404;
      res.set_content(R"({"error": "no dataset loaded"})", "application/json");
      return;
    }
    res.set_content(schema_to_json(ws.table()->schema()), "application/json");
  });
  server.Get("/dag", [&ws](const httplib::Request&, httplib::Response& res) {
    if (!ws.dag()) {
      res.status = 404;
      res.set_content(R"({"error": "no graph loaded"})", "application/json");
      return;
    }
    res.set_content(dag_to_json(*ws.dag()), "application/json");
  });
  for (const char* command : kCommands) {
    const std::string name = command;
    server.Post("/" + name, [&ws, name](const httplib::Request& req, httplib::Response& res) {
      try {
        nlohmann::json request = nlohmann::json::object();
        if (!req.body.empty()) {
          try {
            request = nlohmann::json::parse(req.body);
          } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::Syntax, std::string("request body is not valid JSON: ") + e.what());
          }
        }
        const auto out = run(name, ws, request);
        res.set_content(out.body, out.content_type);
      } catch (const Error& e) {
        res.status = http_status(e);
        res.set_content(error_to_json(e), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(error_to_json(Error(ErrorKind::Numeric, e.what())), "application/json");
      }
    });
  }
}

}  // namespace midway::app
