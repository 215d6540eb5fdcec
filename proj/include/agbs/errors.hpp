#pragma once

#include <stdexcept>
#include <string>

namespace agbs {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
//   validation_error -> 2, transport_error -> 3, everything else -> 4.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad input data, bad config, violated precondition.
struct validation_error : error {
    using error::error;
};

// Unreadable / unwritable files.
struct io_error : error {
    using error::error;
};

// MLM backend or POS tagger failure (carries the backend's message).
struct backend_error : error {
    using error::error;
};

// Victim endpoint unreachable after retries.
struct transport_error : error {
    using error::error;
};

// Victim reachable but the response body is not what the protocol promises.
struct protocol_error : error {
    using error::error;
};

}  // namespace agbs
