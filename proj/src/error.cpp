#include "pavad/error.hpp"

namespace pavad {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Ingestion: return "ingestion";
        case ErrorKind::Windowing: return "windowing";
        case ErrorKind::Spec: return "spec";
        case ErrorKind::Mask: return "mask";
        case ErrorKind::Segmentation: return "segmentation";
        case ErrorKind::InpainterContract: return "inpainter contract";
        case ErrorKind::Flow: return "flow";
        case ErrorKind::Patch: return "patch";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Loss: return "loss";
        case ErrorKind::Label: return "label";
        case ErrorKind::Training: return "training";
        case ErrorKind::Score: return "score";
        case ErrorKind::Weight: return "weight";
        case ErrorKind::Evaluation: return "evaluation";
        case ErrorKind::Checkpoint: return "checkpoint";
        case ErrorKind::Config: return "config";
    }
    return "unknown";
}

}  // namespace pavad
