# Core module for continuity-scaling causal inference
