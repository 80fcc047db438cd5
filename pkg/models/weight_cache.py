from sqlalchemy import Column, Integer, String, DateTime, LargeBinary, Float
from datetime import datetime
from database import Base


class WeightCacheEntry(Base):
    __tablename__ = "weight_tables"

    entry_id = Column(Integer, primary_key=True, index=True)
    cache_key = Column(String(255), unique=True, nullable=False, index=True)
    version = Column(Integer, nullable=False)
    dim = Column(Integer, nullable=False)
    s = Column(Float, nullable=False)
    rule = Column(String(32), nullable=False)
    shape = Column(String(255), nullable=False)  # comma separated stencil shape
    payload = Column(LargeBinary, nullable=False)
    created_at = Column(DateTime, default=datetime.utcnow)
