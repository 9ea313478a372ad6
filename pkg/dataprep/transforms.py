import numpy as np
from scipy.ndimage import zoom


def pad_to_multiple(
    image: np.ndarray, multiple: int, mode: str = "reflect"
) -> tuple[np.ndarray, tuple[int, int]]:
    """마지막 두 축을 multiple 의 배수로 (아래/오른쪽) padding.

    원래 (H, W) 를 함께 돌려주어 crop_to 로 되돌릴 수 있게 한다.
    """
    h, w = image.shape[-2:]
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h == 0 and pad_w == 0:
        return image, (h, w)
    widths = [(0, 0)] * (image.ndim - 2) + [(0, pad_h), (0, pad_w)]
    return np.pad(image, widths, mode=mode), (h, w)


def crop_to(image: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    h, w = size
    return image[..., :h, :w]


def resample_area(image: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """정수 배 축소는 block 평균(area averaging), 그 외에는 scipy zoom."""
    h, w = image.shape[-2:]
    th, tw = size
    if (h, w) == (th, tw):
        return image
    if h % th == 0 and w % tw == 0:
        fh, fw = h // th, w // tw
        lead = image.shape[:-2]
        blocks = image.reshape(*lead, th, fh, tw, fw)
        return blocks.mean(axis=(-3, -1))
    factors = [1.0] * (image.ndim - 2) + [th / h, tw / w]
    return zoom(image, factors, order=1, grid_mode=True, mode="nearest")
