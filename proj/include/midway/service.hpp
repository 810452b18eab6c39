#pragma once

#include "httplib.h"
#include "midway/app.hpp"

namespace midway::app {

// GET /schema, /dag; POST /<command> with a JSON request body.
void install_routes(httplib::Server& server, const Workspace& ws);

}  // namespace midway::app
