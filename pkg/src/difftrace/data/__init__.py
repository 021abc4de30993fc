from .synthetic import (
    MAJORITY,
    MINORITY,
    Generator,
    SyntheticDataset,
    SyntheticDatasetSpec,
    make_synthetic,
    read_dataset,
    register_dataset,
    write_dataset,
)

__all__ = [
    "MAJORITY",
    "MINORITY",
    "Generator",
    "SyntheticDataset",
    "SyntheticDatasetSpec",
    "make_synthetic",
    "read_dataset",
    "register_dataset",
    "write_dataset",
]
