from modules.volume_io.nifti import load_nifti, save_nifti
from modules.volume_io.raw import is_raw, load_raw, save_raw

__all__ = ["is_raw", "load_nifti", "load_raw", "save_nifti", "save_raw"]
