from pathlib import Path
from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker
from config import settings
import logging

logger = logging.getLogger(__name__)

Base = declarative_base()

_engines = {}


def get_engine(cache_dir: str = None):
    """Engine of the weight-table cache database inside cache_dir"""
    directory = Path(cache_dir or settings.CACHE_DIR)
    key = str(directory.resolve())
    if key in _engines:
        return _engines[key]

    logger.info(f"Opening weight cache in {directory}")
    try:
        directory.mkdir(parents=True, exist_ok=True)
        engine = create_engine(
            f"sqlite:///{directory / 'weights.sqlite'}",
            echo=False,
            pool_pre_ping=True,  # Verify connections before using
        )
        Base.metadata.create_all(bind=engine)
        _engines[key] = engine
        logger.info("Weight cache engine created successfully")
        return engine
    except Exception as e:
        logger.error(f"Failed to create cache engine: {str(e)}", exc_info=True)
        raise


def get_db(cache_dir: str = None):
    SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=get_engine(cache_dir))
    db = SessionLocal()
    try:
        logger.debug("Cache session created")
        yield db
    finally:
        db.close()
        logger.debug("Cache session closed")
