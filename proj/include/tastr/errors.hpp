#pragma once

#include <stdexcept>
#include <string>

namespace tastr {

// Error taxonomy; the CLI maps these onto process exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file (bad JSON, invariant violation in a record).
struct ParseError : Error {
    using Error::Error;
};

// Feature dimensions disagree within a dataset or between dataset and model.
struct DimensionError : Error {
    using Error::Error;
};

// Structurally valid input that is inconsistent as a whole
// (duplicate ids, empty dataset, truth not covering the data).
struct IntegrityError : Error {
    using Error::Error;
};

// Missing or non-positive path length between a camera pair.
struct TopologyError : Error {
    using Error::Error;
};

// Invalid configuration value; message names the offending field.
struct ConfigError : Error {
    using Error::Error;
};

// No camera (or camera pair) admits a batch under the sampler constraints.
struct SamplingError : Error {
    using Error::Error;
};

// Caller broke an operation precondition (shape mismatch, P < 2, ...).
struct ContractError : Error {
    using Error::Error;
};

// Fewer values than clusters requested.
struct ClusterError : Error {
    using Error::Error;
};

// Retrieval protocol violation (query without any valid positive).
struct ProtocolError : Error {
    using Error::Error;
};

}  // namespace tastr
