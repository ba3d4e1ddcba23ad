from .burned_areas import BurnedAreaFormatError, read_burned_areas, write_burned_areas
from .hotspot_csv import HotspotCSVError, read_hotspot_csv, write_hotspot_csv
from .patch_store import PatchStoreError, iter_patches, read_patches, write_patches
from .raster import bicubic_upsample, extract_patch, keys_kernel
from .records import (
    BAND_NAMES, LULC_CLASSES, BurnedAreaRecord, HotspotRecord, RasterPatch, RecordValidationError,
    Sensor, ingest_patch,
)
from .synthetic import (
    InfeasibleSceneError, SceneConfig, SyntheticScene, SyntheticTruth, generate_synthetic_scene,
)
