#pragma once

#include "fsteer/session.hpp"

namespace httplib {
class Server;
}

namespace fsteer {

// Binds every /v1 endpoint to `service`. Request and response bodies are JSON.
void register_routes(httplib::Server& server, SessionService& service);

// HTTP status for an engine exception.
int status_for(const std::exception& e);

} // namespace fsteer
