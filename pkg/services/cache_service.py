import io
import logging
from typing import Optional

import numpy as np
from sqlalchemy.exc import SQLAlchemyError

from config import settings
from database import get_db
from models.weight_cache import WeightCacheEntry

logger = logging.getLogger(__name__)


class CacheService:

    @staticmethod
    def load_stencil(cache_key: str, cache_dir: str = None) -> Optional[np.ndarray]:
        """Fetch a cached stencil; rows written by another format version are dropped"""
        if not settings.CACHE_ENABLED and cache_dir is None:
            return None
        db = next(get_db(cache_dir))
        try:
            entry = db.query(WeightCacheEntry).filter(WeightCacheEntry.cache_key == cache_key).first()
            if entry is None:
                logger.debug(f"Cache miss: {cache_key}")
                return None
            if entry.version != settings.TABLE_VERSION:
                logger.info(f"Discarding cached table of version {entry.version}: {cache_key}")
                db.delete(entry)
                db.commit()
                return None
            stencil = np.load(io.BytesIO(entry.payload), allow_pickle=False)
            expected = tuple(int(x) for x in entry.shape.split(","))
            if stencil.shape != expected:
                logger.warning(f"Cached stencil has shape {stencil.shape}, expected {expected}; ignoring")
                return None
            logger.info(f"Cache hit: {cache_key}")
            return stencil
        except SQLAlchemyError as e:
            logger.error(f"Failed to read weight cache: {str(e)}", exc_info=True)
            return None
        finally:
            db.close()

    @staticmethod
    def store_stencil(cache_key: str, stencil: np.ndarray, dim: int, s: float, rule: str, cache_dir: str = None):
        """Persist a stencil under its key, replacing any previous row"""
        if not settings.CACHE_ENABLED and cache_dir is None:
            return
        buffer = io.BytesIO()
        np.save(buffer, stencil, allow_pickle=False)
        db = next(get_db(cache_dir))
        try:
            db.query(WeightCacheEntry).filter(WeightCacheEntry.cache_key == cache_key).delete()
            entry = WeightCacheEntry(
                cache_key=cache_key,
                version=settings.TABLE_VERSION,
                dim=dim,
                s=s,
                rule=rule,
                shape=",".join(str(x) for x in stencil.shape),
                payload=buffer.getvalue(),
            )
            db.add(entry)
            db.commit()
            logger.info(f"Stored weight table: {cache_key}")
        except SQLAlchemyError as e:
            db.rollback()
            logger.error(f"Failed to write weight cache: {str(e)}", exc_info=True)
        finally:
            db.close()
