#pragma once

#include <memory>

#include "attackdet/model_backend.hpp"

namespace attackdet {

// OpenAI-compatible chat-completions client; defined in remote_backend.cpp to
// keep the httplib include out of the public headers.
std::unique_ptr<Backend> make_remote_backend(const BackendConfig& config);

}  // namespace attackdet
