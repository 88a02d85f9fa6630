"""Deformable registration toolkit for bilateral mammography studies.

The heavy lifting lives in the compiled ``_core`` extension; this package
just re-exports its public surface.
"""

from ._core import (  # noqa: F401
    BSplineGrid,
    ConfigurationError,
    DataError,
    DisplacementField,
    FormatError,
    Image,
    IoError,
    Mask,
    RegistrationError,
    SegmentationImageError,
    __version__,
    add_calcifications,
    add_mass,
    apply_affine,
    correlation,
    flip_horizontal,
    generate_dataset,
    histogram_match,
    jeh_image,
    load_field,
    load_pgm,
    make_breast_phantom,
    metrics,
    mutual_information,
    refine_grid,
    register_bspline,
    register_demons,
    resample,
    run_experiment,
    sample_bilinear,
    save_field,
    save_pgm,
    segment_breast,
    ssd,
    warp,
)
